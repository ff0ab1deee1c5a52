#include <iostream>

int main() {
  std::cout << "cssl cli placeholder\n";
  return 0;
}
