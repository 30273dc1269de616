#include "crownfuse/pipeline.hpp"

int main(int argc, char** argv) { return crownfuse::pipeline::run_cli(argc, argv); }
