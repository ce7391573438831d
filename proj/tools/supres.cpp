// SPDX-License-Identifier: MIT
#include "supres/cli.hpp"

int main(int argc, char** argv) {
    return supres::cli::main(argc, argv);
}
