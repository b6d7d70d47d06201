#include <cstdio>

int main() {
  std::puts("sgtamp: CLI under construction");
  return 1;
}
