#include "vilegal/cli.hpp"

int main(int argc, char** argv) {
    return vilegal::run_cli({argv + 1, argv + argc});
}
