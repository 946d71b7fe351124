#include <iostream>

#include "emojimodal/cli.hpp"

int main(int argc, char** argv) {
  emojimodal::cli::configure_logging();
  return emojimodal::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
