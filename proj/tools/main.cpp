#include "cli.hpp"

int main(int argc, char** argv) { return ganvert::run_cli(argc, argv); }
