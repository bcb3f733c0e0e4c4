#pragma once

// Entry point of the winstat command-line tool, split out of main() so
// end-to-end tests can link the command layer directly.

namespace winstat::cli {

int run(int argc, const char* const* argv);

}  // namespace winstat::cli
