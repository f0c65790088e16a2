#include <iostream>

#include "bvrvi/harness.hpp"

int main(int argc, char** argv) {
  const bvrvi::ParseOutcome parsed = bvrvi::parse_config(argc, argv);
  if (!parsed.config) {
    (parsed.exit_code == bvrvi::kExitOk ? std::cout : std::cerr) << parsed.message << "\n";
    return parsed.exit_code;
  }
  return bvrvi::run_experiment(*parsed.config, std::cout);
}
