int acceptance_placeholder = 0;
#include <cstdio>
int main(){ std::puts("placeholder"); return 1; }
