#include <string>
#include <vector>

#include "latent_invert/cli.hpp"

int main(int argc, char** argv) {
    return latent_invert::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
