#include <string>
#include <vector>

#include "driftmon/cli.hpp"

int main(int argc, char** argv) {
    return driftmon::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
