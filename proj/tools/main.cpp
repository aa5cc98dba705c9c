#include "cli/commands.hpp"

int main(int argc, char **argv) {
	return sstgnn::cli::run(argc, argv);
}
