#ifndef MTXPLAIN_CLI_H_
#define MTXPLAIN_CLI_H_

#include <iosfwd>

namespace mtx {

// Entry point of the mtxplain tool. Successful commands write one JSON
// document to `out` and return 0; failures write a message to `err` and
// return 1 for bad input or 2 for runtime errors. Progress goes to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mtx

#endif  // MTXPLAIN_CLI_H_
