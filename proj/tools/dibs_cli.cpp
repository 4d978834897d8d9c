#include "dibs/dibs.hpp"
int main() { return 0; }
