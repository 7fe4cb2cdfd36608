// Writes the golden corpus: one canonical message per file.
#include "support/golden_messages.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: golden_gen <output-dir>\n";
        return 2;
    }
    const std::filesystem::path dir(argv[1]);
    std::filesystem::create_directories(dir);
    for (const auto& [name, env] : ursula::oracle::golden_messages()) {
        std::ofstream f(dir / (name + ".json"), std::ios::binary);
        f << ursula::comms::encode(env);
    }
    std::cout << "wrote " << ursula::oracle::golden_messages().size() << " messages to " << dir << "\n";
}
