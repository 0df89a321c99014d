// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#include "swiftbot/cli/app.hpp"

int main(int argc, char** argv) { return swiftbot::run_cli(argc, argv); }
