#include <iostream>
#include <string>
#include <vector>

#include "itrs/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  auto report = itrs::cli::run_command(args);
  if (!report.error.empty() && !report.as_json) {
    std::cerr << report.text;
  } else {
    std::cout << report.render();
  }
  return report.exit_code;
}
