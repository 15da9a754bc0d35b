#include "cli.hpp"

int main(int argc, char** argv) { return mkvlab::main_entry(argc, argv); }
