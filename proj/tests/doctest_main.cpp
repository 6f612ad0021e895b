#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "embias/common.hpp"

int main(int argc, char** argv) {
  embias::set_warnings_enabled(false);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
