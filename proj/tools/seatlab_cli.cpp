#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "seatlab/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  return seatlab::cli_main(argc, argv, std::cout, std::cerr);
}
