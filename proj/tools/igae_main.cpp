#include "igae/cli.hpp"

int main(int argc, char** argv) { return igae::cli_dispatch(argc, argv); }
