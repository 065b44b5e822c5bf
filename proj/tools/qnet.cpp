#include <qnet/cli.hpp>

int main(int argc, char** argv)
{
    return qnet::cli_main(argc, argv);
}
