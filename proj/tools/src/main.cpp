#include "cli_app.hpp"

int main(int argc, char** argv) { return flipkljn::cli::run(argc, argv); }
