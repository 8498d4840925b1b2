#include "app.hpp"

#include <iostream>

int main(int argc, char** argv) { return volterra::app::run(argc, argv, std::cout, std::cerr); }
