#include "cauge/cli.hpp"

int main(int argc, char** argv) { return cauge::cli::run(argc, argv); }
