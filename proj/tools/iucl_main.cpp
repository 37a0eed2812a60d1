#include "iucl/cli.hpp"

int main(int argc, char** argv) { return iucl::cli::dispatch(argc, argv); }
