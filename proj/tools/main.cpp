#include "cli.hpp"

#include <iostream>

int main( int argc, char** argv )
{
  std::vector<std::string> const args( argv + 1, argv + argc );
  return gatekit::cli::run( args, std::cout, std::cerr );
}
