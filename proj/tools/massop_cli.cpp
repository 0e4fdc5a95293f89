#include <cstdio>

int main() {
  std::puts("massop: work in progress");
  return 2;
}
