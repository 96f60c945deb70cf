#include <string>
#include <vector>

#include "uniembed/cli.hpp"

int main(int argc, char** argv) {
    return uniembed::run(std::vector<std::string>(argv + 1, argv + argc));
}
