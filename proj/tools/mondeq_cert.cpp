#include <cstdio>
int main() { std::puts("mondeq-cert: CLI under construction"); return 0; }
