#include "silicon_entropy/cli/app.hpp"

int main(int argc, char** argv) { return silicon_entropy::cli::run(argc, argv); }
