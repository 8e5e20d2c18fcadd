#include <cstdio>

int main() {
    std::puts("cli not wired yet");
    return 2;
}
