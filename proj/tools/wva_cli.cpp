#include "wva/report.hpp"

int main(int argc, char** argv) { return wva::run_main(argc, argv); }
