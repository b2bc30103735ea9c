// Placeholder entry point; the subcommands land together with the cli header.
int main() { return 0; }
