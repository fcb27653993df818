#include <csignal>

#include "bidrl/cli.hpp"

namespace {

extern "C" void on_interrupt(int) { bidrl::cli::stop_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  return bidrl::cli::run(argc, argv);
}
