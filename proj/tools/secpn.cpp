#include "secpn/cli.hpp"

int main(int argc, char** argv) { return secpn::cli::run(argc, argv); }
