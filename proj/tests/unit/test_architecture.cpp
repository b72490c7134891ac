#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::set<std::string> sources_containing(const std::string& needle) {
    std::set<std::string> out;
    for (const auto* sub : {"src", "include", "tools"})
        for (const auto& e : fs::recursive_directory_iterator(oracle::source_dir() / sub))
            if (e.is_regular_file() && slurp(e.path()).find(needle) != std::string::npos)
                out.insert(e.path().filename().string());
    return out;
}

}  // namespace

TEST_SUITE("architecture") {

TEST_CASE("outbound HTTP goes through the LLM client only") {
    CHECK(sources_containing("httplib::Client") == std::set<std::string>{"llm_client.cpp"});
}

TEST_CASE("the HTTP library is confined to the client and the annotation service") {
    CHECK(sources_containing("#include <httplib.h>") ==
          std::set<std::string>{"annotation_service.cpp", "llm_client.cpp"});
}

}  // TEST_SUITE
