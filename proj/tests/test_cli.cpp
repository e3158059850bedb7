// End-to-end checks of the command-line interface against the built binary.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "setdet/harness.hpp"

#ifndef SETDET_CLI_PATH
#error "SETDET_CLI_PATH must point at the setdet binary"
#endif

using namespace setdet;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SETDET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

fs::path workspace() {
    const fs::path dir = fs::temp_directory_path() / "setdet_cli_tests";
    return dir;
}

// a configuration small enough for CLI runs to finish in about a second
void write_tiny_config(const fs::path& path, uint64_t seed) {
    std::ofstream out(path);
    out << "epochs = 2\nlr_drop_epoch = 2\nbatch_size = 8\nn_train = 16\nn_val = 4\n"
        << "grid = 4\nhidden_dim = 16\nffn_dim = 32\ndecoder_layers = 2\nnum_queries = 6\n"
        << "classes = 4\nkmax = 3\ndn_groups = 2\nseed = " << seed << "\n";
}

}  // namespace

TEST_CASE("cli train/eval/instability/dump-scenes round trip") {
    const fs::path dir = workspace();
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "tiny.cfg";
    write_tiny_config(cfg_path, 5);

    SUBCASE("train writes a run directory and refuses to overwrite") {
        REQUIRE(run_cli("train --config " + cfg_path.string() + " --out " +
                        (dir / "run_a").string()) == 0);
        CHECK(fs::exists(dir / "run_a" / "metrics.csv"));
        CHECK(fs::exists(dir / "run_a" / "config.txt"));
        CHECK(fs::exists(dir / "run_a" / "checkpoint.bin"));

        // overwrite refused without --force
        CHECK(run_cli("train --config " + cfg_path.string() + " --out " +
                      (dir / "run_a").string()) != 0);
        CHECK(run_cli("train --config " + cfg_path.string() + " --out " +
                      (dir / "run_a").string() + " --force") == 0);

        // seed and dn-groups overrides change the digest recorded in config.txt
        REQUIRE(run_cli("train --config " + cfg_path.string() + " --seed 77 --dn-groups 0 " +
                        "--no-mask --out " + (dir / "run_b").string()) == 0);
        const TrainConfig b = load_config_file((dir / "run_b" / "config.txt").string());
        CHECK(b.seed == 77);
        CHECK(b.dn_groups == 0);
        CHECK(b.use_mask == false);

        SUBCASE("eval loads the checkpoint against the written config") {
            CHECK(run_cli("eval --checkpoint " + (dir / "run_a" / "checkpoint.bin").string() +
                          " --config " + (dir / "run_a" / "config.txt").string()) == 0);
            // digest mismatch: evaluating with a different config must fail
            CHECK(run_cli("eval --checkpoint " + (dir / "run_a" / "checkpoint.bin").string() +
                          " --config " + (dir / "run_b" / "config.txt").string()) != 0);
        }

        SUBCASE("instability prints a comparison table") {
            CHECK(run_cli("instability --run-dir " + (dir / "run_a").string() + " --run-dir " +
                          (dir / "run_b").string()) == 0);
            CHECK(run_cli("instability --run-dir " + (dir / "does_not_exist").string()) != 0);
        }
    }

    SUBCASE("DN_SEED overrides the config seed") {
        setenv("DN_SEED", "4242", 1);
        REQUIRE(run_cli("train --config " + cfg_path.string() + " --out " +
                        (dir / "run_env").string()) == 0);
        unsetenv("DN_SEED");
        const TrainConfig c = load_config_file((dir / "run_env" / "config.txt").string());
        CHECK(c.seed == 4242);
    }

    SUBCASE("dump-scenes writes one JSON record per scene") {
        REQUIRE(run_cli("dump-scenes --config " + cfg_path.string() + " --count 5 --out " +
                        (dir / "scenes.jsonl").string()) == 0);
        std::ifstream in(dir / "scenes.jsonl");
        std::string line;
        int lines = 0;
        while (std::getline(in, line)) {
            CHECK(line.front() == '{');
            CHECK(line.back() == '}');
            CHECK(line.find("\"boxes\"") != std::string::npos);
            ++lines;
        }
        CHECK(lines == 5);
    }

    SUBCASE("unknown config keys are reported as errors") {
        std::ofstream bad(dir / "bad.cfg");
        bad << "epochs = 2\nnonsense_key = 1\n";
        bad.close();
        CHECK(run_cli("train --config " + (dir / "bad.cfg").string()) != 0);
    }

    fs::remove_all(dir);
}

TEST_CASE("cli ablate runs a mask sweep on a tiny config") {
    const fs::path dir = workspace() / "ablate";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "tiny.cfg";
    write_tiny_config(cfg_path, 6);

    REQUIRE(run_cli("ablate --sweep mask --config " + cfg_path.string() + " --jobs 2 --out " +
                    dir.string()) == 0);
    CHECK(fs::exists(dir / "mask_on" / "metrics.csv"));
    CHECK(fs::exists(dir / "mask_off" / "metrics.csv"));
    CHECK(run_cli("ablate --sweep bogus --config " + cfg_path.string()) != 0);
    fs::remove_all(dir);
}
