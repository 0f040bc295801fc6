#include <iostream>
int main(){ std::cout << "acceptance: not yet implemented\n"; return 1; }
