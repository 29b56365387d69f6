#pragma once

#include <ostream>

namespace bimsgc {

/// Exit codes: 0 ok, 2 config error, 3 numeric error or failed gradcheck, 4 I/O error.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace bimsgc
