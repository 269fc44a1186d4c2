#include "typedpp/cli.hpp"

int main(int argc, char** argv) { return typedpp::cli_main(argc, argv); }
