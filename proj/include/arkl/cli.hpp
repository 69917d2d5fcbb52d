#pragma once

namespace arkl {

/// Entry point of the arkl command-line tool. Exit codes: 0 success,
/// 1 runtime failure, 2 invalid config or parameters, 3 enumeration cap exceeded.
int cli_main(int argc, char** argv);

}  // namespace arkl
