#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "c2f/checkpoint.hpp"
#include "c2f/run_config.hpp"
#include "c2f/train.hpp"
#include "doctest.h"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "c2f_io_test";
    fs::create_directories(dir);
    return dir;
}

ModelConfig micro_config() {
    ModelConfig cfg;
    cfg.channels = {4, 8, 16, 32};
    cfg.depths = {1, 1, 1, 1};
    cfg.kernel_size = 5;
    cfg.num_classes = 10;
    return cfg;
}

RunConfig random_run_config(Rng& rng) {
    RunConfig rc;
    const int pick = static_cast<int>(rng.next_u64() % 4);
    if (pick == 0) {
        rc.model = ModelConfig::preset(Variant::N);
    } else if (pick == 1) {
        rc.model = ModelConfig::preset(Variant::IS);
        rc.model.patch_embed_style =
            rng.bernoulli(0.5) ? PatchEmbedStyle::ThreeConv : PatchEmbedStyle::SingleConv;
    } else {
        rc.model = micro_config();
        rc.model.channels = {static_cast<std::int64_t>(2 + rng.next_u64() % 14),
                             static_cast<std::int64_t>(2 + rng.next_u64() % 14),
                             static_cast<std::int64_t>(2 + rng.next_u64() % 14),
                             static_cast<std::int64_t>(2 + rng.next_u64() % 14)};
        rc.model.depths = {static_cast<std::int64_t>(1 + rng.next_u64() % 3),
                           static_cast<std::int64_t>(1 + rng.next_u64() % 3),
                           static_cast<std::int64_t>(1 + rng.next_u64() % 3),
                           static_cast<std::int64_t>(1 + rng.next_u64() % 3)};
    }
    const int kernels[] = {5, 7, 9, 11, 15, 21};
    rc.model.kernel_size = kernels[rng.next_u64() % 6];
    rc.model.ffn_ratio = 1.0 + static_cast<double>(rng.next_u64() % 6) / 2.0;
    rc.model.fusion = static_cast<FusionStrategy>(rng.next_u64() % 5);
    rc.model.drop_path_rate = 0.25 * rng.uniform();
    rc.model.layer_scale_init = rng.uniform() * 1e-3;
    rc.model.num_classes = static_cast<std::int64_t>(2 + rng.next_u64() % 999);
    rc.model.a_branch_gelu = rng.bernoulli(0.5);
    rc.model.output_projection = rng.bernoulli(0.5);
    rc.train.batch_size = static_cast<std::int64_t>(1 + rng.next_u64() % 64);
    rc.train.lr_base = rng.uniform() * 0.01;
    rc.train.warmup_steps = rng.bernoulli(0.5) ? -1 : static_cast<std::int64_t>(rng.next_u64() % 50);
    rc.train.epochs = static_cast<std::int64_t>(1 + rng.next_u64() % 20);
    rc.train.label_smoothing = 0.3 * rng.uniform();
    rc.train.seed = rng.next_u64();
    rc.train.train_size = static_cast<std::int64_t>(64 + rng.next_u64() % 512);
    rc.train.val_size = static_cast<std::int64_t>(32 + rng.next_u64() % 256);
    return rc;
}

}  // namespace

TEST_CASE("run config round trips losslessly (randomized property)") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const RunConfig rc = random_run_config(rng);
        const std::string text = run_config_to_json_text(rc);
        const RunConfig back = run_config_from_json_text(text);
        CHECK(back == rc);
        CHECK(run_config_to_json_text(back) == text);
    }
}

TEST_CASE("run config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(run_config_from_json_text("{\"variant\":\"T\",\"bogus\":1}"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json_text("not json at all"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json_text("[1,2,3]"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json_text("{\"variant\":\"Z\"}"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json_text("{\"variant\":\"T\",\"kernel_size\":6}"),
                    ConfigError);
    // Named variant with explicit overrides keeps the overrides.
    const RunConfig rc =
        run_config_from_json_text("{\"variant\":\"N\",\"kernel_size\":7,\"num_classes\":5}");
    CHECK(rc.model.kernel_size == 7);
    CHECK(rc.model.num_classes == 5);
    CHECK(rc.model.channels == std::vector<std::int64_t>{64, 128, 256, 512});
}

TEST_CASE("checkpoint: save/load round trip is bitwise stable") {
    const fs::path dir = temp_dir();
    const std::string path = (dir / "model.c2f").string();
    Rng rng(7);
    Model<float> m = build_model<float>(micro_config(), rng);
    checkpoint_save(m, path);
    Model<float> loaded = checkpoint_load<float>(path);

    // Identical parameter bytes.
    std::vector<float> a, b;
    for_each_param<float>(m, [&](const std::string&, Tensor<float>& t) {
        a.insert(a.end(), t.values().begin(), t.values().end());
    });
    for_each_param<float>(loaded, [&](const std::string&, Tensor<float>& t) {
        b.insert(b.end(), t.values().begin(), t.values().end());
    });
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0);

    // Bitwise-identical eval logits.
    Tensor<float> x = Tensor<float>::randn({2, 3, 32, 32}, rng);
    Rng fwd(0);
    Tensor<float> l1 = model_forward<float>(nullptr, m, x, false, fwd);
    Tensor<float> l2 = model_forward<float>(nullptr, loaded, x, false, fwd);
    CHECK(std::memcmp(l1.data(), l2.data(), sizeof(float) * l1.numel()) == 0);

    // save -> load -> save produces byte-identical files.
    const std::string path2 = (dir / "model2.c2f").string();
    checkpoint_save(loaded, path2);
    CHECK(read_file(path) == read_file(path2));

    CHECK(checkpoint_dtype(path) == "f32");
}

TEST_CASE("checkpoint: f64 models round trip too") {
    const fs::path dir = temp_dir();
    const std::string path = (dir / "model64.c2f").string();
    Rng rng(12);
    Model<double> m = build_model<double>(micro_config(), rng);
    checkpoint_save(m, path);
    CHECK(checkpoint_dtype(path) == "f64");
    Model<double> loaded = checkpoint_load<double>(path);
    Tensor<double> x = Tensor<double>::randn({1, 3, 32, 32}, rng);
    Rng fwd(0);
    Tensor<double> l1 = model_forward<double>(nullptr, m, x, false, fwd);
    Tensor<double> l2 = model_forward<double>(nullptr, loaded, x, false, fwd);
    CHECK(std::memcmp(l1.data(), l2.data(), sizeof(double) * l1.numel()) == 0);
    CHECK_THROWS_AS(checkpoint_load<float>(path), FormatError);
}

TEST_CASE("checkpoint: corrupted inputs are rejected") {
    const fs::path dir = temp_dir();
    const std::string path = (dir / "corrupt.c2f").string();
    Rng rng(8);
    Model<float> m = build_model<float>(micro_config(), rng);
    checkpoint_save(m, path);
    const std::string good = read_file(path);

    // Flipped magic byte.
    std::string bad = good;
    bad[0] = 'X';
    write_file(path, bad);
    CHECK_THROWS_AS(checkpoint_load<float>(path), FormatError);

    // Unsupported version.
    bad = good;
    bad[4] = 9;
    write_file(path, bad);
    CHECK_THROWS_AS(checkpoint_load<float>(path), FormatError);

    // Truncated payload.
    write_file(path, good.substr(0, good.size() - 64));
    CHECK_THROWS_AS(checkpoint_load<float>(path), FormatError);

    // Trailing garbage.
    write_file(path, good + "zz");
    CHECK_THROWS_AS(checkpoint_load<float>(path), FormatError);

    // Wrong dtype for the requested instantiation.
    write_file(path, good);
    CHECK_THROWS_AS(checkpoint_load<double>(path), FormatError);

    // Header shorter than the fixed fields.
    write_file(path, "C2F");
    CHECK_THROWS_AS(checkpoint_load<float>(path), FormatError);
}

TEST_CASE("checkpoint manifest lists every parameter tensor") {
    const fs::path dir = temp_dir();
    const std::string path = (dir / "manifest.c2f").string();
    Rng rng(9);
    Model<float> m = build_model<float>(micro_config(), rng);
    checkpoint_save(m, path);
    std::size_t n_params = 0;
    for_each_param<float>(m, [&](const std::string&, Tensor<float>&) { ++n_params; });
    const std::string blob = read_file(path);
    std::size_t count = 0, pos = 0;
    while ((pos = blob.find("\"name\"", pos)) != std::string::npos) {
        ++count;
        pos += 6;
    }
    CHECK(count == n_params);
}

#ifdef C2F_CLI_PATH

namespace {

int run_cli(const std::string& args, std::string* out_text = nullptr) {
    const fs::path dir = temp_dir();
    const std::string out_file = (dir / "cli_out.txt").string();
    const std::string cmd = std::string(C2F_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (out_text) *out_text = read_file(out_file);
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli summarize: bands, block listing, error contract") {
    std::string out;
    CHECK(run_cli("summarize --variant T --resolution 224 224", &out) == 0);
    CHECK(out.find("25.23 M") != std::string::npos);
    CHECK(out.find("4.143 G") != std::string::npos);

    CHECK(run_cli("summarize --variant N", &out) == 0);
    // 14 distinct blocks appear in the per-layer listing.
    int blocks = 0;
    std::size_t pos = 0;
    while ((pos = out.find(".norm1 ", pos)) != std::string::npos) {
        ++blocks;
        ++pos;
    }
    CHECK(blocks == 14);

    CHECK(run_cli("summarize --variant Q", &out) == 2);
    CHECK(out.find("valid: N, T, S, B, L, IS, IB") != std::string::npos);

    CHECK(run_cli("summarize --variant T --resolution 225 224", &out) == 2);
}

TEST_CASE("cli gradcheck: pass, determinism, injected bug") {
    std::string out1, out2;
    CHECK(run_cli("--seed 3 gradcheck --rounds 1", &out1) == 0);
    CHECK(out1.find("all checks passed") != std::string::npos);
    CHECK(run_cli("--seed 3 gradcheck --rounds 1", &out2) == 0);
    CHECK(out1 == out2);
    CHECK(run_cli("--seed 3 gradcheck --rounds 1 --inject-bug", &out1) == 1);
}

TEST_CASE("cli bench: csv structure and exact MAC scaling at small sizes") {
    std::string out;
    CHECK(run_cli("bench --op modulation --channels 8 --kernel 5 --resolutions 8,16,32 --reps 5",
                  &out) == 0);
    CHECK(out.find("resolution,analytic_macs,wall_ms") != std::string::npos);
    long long r8 = 0, r16 = 0;
    std::sscanf(out.c_str() + out.find("\n8,"), "\n8,%lld", &r8);
    std::sscanf(out.c_str() + out.find("\n16,"), "\n16,%lld", &r16);
    CHECK(r16 == 4 * r8);

    CHECK(run_cli("bench --op attention --channels 8 --resolutions 4,8 --reps 5", &out) == 0);
    CHECK(run_cli("bench --op modulation --resolutions 8 --reps 2", &out) == 2);
    CHECK(run_cli("bench --op nonsense", &out) == 2);
}

TEST_CASE("cli train: outputs, self-consistency, determinism, error codes") {
    const fs::path dir = temp_dir();
    const std::string cfg_path = (dir / "train_cfg.json").string();
    write_file(cfg_path,
               "{\"channels\":[4,8,16,32],\"depths\":[1,1,1,1],\"kernel_size\":5,"
               "\"num_classes\":10,\"drop_path_rate\":0.0,\"batch_size\":16,"
               "\"lr_base\":0.016,\"epochs\":2,\"seed\":11,\"train_size\":64,"
               "\"val_size\":32}");
    const std::string out_dir = (dir / "run1").string();
    std::string out;
    CHECK(run_cli("--config " + cfg_path + " train --out " + out_dir, &out) == 0);
    CHECK(fs::exists(out_dir + "/metrics.csv"));
    CHECK(fs::exists(out_dir + "/checkpoint.c2f"));

    // Checkpoint evaluates to the val accuracy recorded in the last CSV row.
    const std::string csv = read_file(out_dir + "/metrics.csv");
    const std::size_t last_line = csv.rfind('\n', csv.size() - 2);
    double val_acc = -1;
    {
        const std::string row = csv.substr(last_line + 1);
        const std::size_t comma = row.rfind(',');
        val_acc = std::stod(row.substr(comma + 1));
    }
    Model<float> m = checkpoint_load<float>(out_dir + "/checkpoint.c2f");
    SynthDataset data;
    data.num_classes = 10;
    data.train_size = 64;
    data.val_size = 32;
    data.seed = 11;
    const double acc = evaluate_accuracy(m, data, true, 16);
    CHECK(acc == doctest::Approx(val_acc).epsilon(1e-6));

    // Bitwise-identical rerun.
    const std::string out_dir2 = (dir / "run2").string();
    CHECK(run_cli("--config " + cfg_path + " train --out " + out_dir2, &out) == 0);
    CHECK(read_file(out_dir + "/metrics.csv") == read_file(out_dir2 + "/metrics.csv"));
    CHECK(read_file(out_dir + "/checkpoint.c2f") == read_file(out_dir2 + "/checkpoint.c2f"));

    CHECK(run_cli("--config /nonexistent/cfg.json train --out " + out_dir, &out) == 2);

    // Unwritable output location is an I/O failure, not a usage error.
    CHECK(run_cli("--config " + cfg_path + " train --out /proc/c2f_cannot_write", &out) == 3);
}

TEST_CASE("cli probe-rf prints the expected bounding boxes") {
    std::string out;
    CHECK(run_cli("probe-rf --layer mod --kernel 11 --size 31", &out) == 0);
    CHECK(out.find("-> 11x11") != std::string::npos);
    CHECK(run_cli("probe-rf --layer mod --kernel 21", &out) == 0);
    CHECK(out.find("-> 21x21") != std::string::npos);
    CHECK(run_cli("probe-rf --layer block --kernel 11", &out) == 0);
    CHECK(out.find("-> 13x13") != std::string::npos);
    CHECK(run_cli("probe-rf --layer nope", &out) == 2);
}

#endif  // C2F_CLI_PATH
