#include <string>
#include <vector>

#include "cimla/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cimla::cli::dispatch(args);
}
