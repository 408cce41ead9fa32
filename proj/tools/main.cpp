#include <string>
#include <vector>

#include "ensemblekit/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ensemblekit::cli::run_cli(std::move(args));
}
