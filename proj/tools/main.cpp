#include "cli.hpp"
#include "iwn/platform.hpp"

int main(int argc, char** argv) {
  iwn::reexec_with_blas_core(argv);
  return iwn::cli::run(argc, argv);
}
