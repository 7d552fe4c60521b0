#pragma once

namespace blipcdf::cli {

/// Parses arguments, runs one subcommand, and maps failures to exit codes:
/// 0 ok, 2 argument error, 3 data error, 4 numerical failure.
int run(int argc, char** argv);

}  // namespace blipcdf::cli
