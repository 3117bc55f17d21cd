#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "lusk/cli.hpp"

using namespace lusk;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name)
{
    const auto p = fs::path(::testing::TempDir()) / ("cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream os(path);
    os << text;
}

std::string slurp(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int run(const std::string& args)
{
    const std::string cmd = std::string(LUSK_BINARY) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small enough for seconds-long CLI runs.
const char* kTinyConfig = R"(# tiny run
frames=12
input_size=32
k=3
stage1_channels=4
stage2_channels=6
refine_channels=4
cbam_reduction=2
epochs=2
batch_size=4
pairs=4
pretrain_epochs=1
ssim_threshold=0.5
)";

} // namespace

TEST(RunConfig, ParseSerializeParseIsFixedPoint)
{
    const std::string text = "k=5\ninput_size=64\nepochs=30\nuse_cbam=true\ninput_mode=norm\nb_lines=0.2:0.001:2:0.5\n"
                             "lambdas=3,6,9\nstop_gradient_branch=target\ndata_dir=/tmp/x\n";
    const RunConfig a = parse_run_config(text, "a.cfg");
    const std::string s1 = run_config_text(a);
    const RunConfig b = parse_run_config(s1, "b.cfg");
    EXPECT_EQ(a, b);
    EXPECT_EQ(run_config_text(b), s1);
    EXPECT_EQ(b.model_config().k, 5u);
    EXPECT_TRUE(b.model_config().cbam_enabled);
    EXPECT_EQ(b.preprocess_config().mode, InputMode::norm_stack);
    EXPECT_EQ(b.preprocess_config().input_size, 64u);
    EXPECT_EQ(b.data_dir, "/tmp/x");
    EXPECT_EQ(parse_run_config(run_config_text(RunConfig{}), "d"), RunConfig{});
}

TEST(RunConfig, KeysAreOwnedByExactlyOneComponent)
{
    KvTable scene, fusion, model, train;
    write_kv(SceneSpec{}, scene);
    write_kv(FusionConfig{}, fusion);
    write_kv(ModelConfig{}, model);
    write_kv(TrainConfig{}, train);
    std::multiset<std::string> keys;
    for (const auto* t : {&scene, &fusion, &model, &train})
        for (const auto& e : t->entries()) keys.insert(e.key);
    for (const auto& k : keys) EXPECT_EQ(keys.count(k), 1u) << k;
}

TEST(RunConfig, UnknownKeysAreAllListed)
{
    try {
        parse_run_config("k=3\nbogus=1\nepochs=2\ncbam_enabled=true\n", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("run.cfg:2: bogus"), std::string::npos) << msg;
        EXPECT_NE(msg.find("run.cfg:4: cbam_enabled"), std::string::npos) << msg;
    }
}

TEST(RunConfig, InvalidValuesCarryLocation)
{
    try {
        parse_run_config("\nepochs=many\n", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_run_config("ssim_threshold=1.5\n", "run.cfg"), ConfigError);
    EXPECT_THROW(parse_run_config("pleura_depth=0.45\n", "run.cfg"), ConfigError);
    EXPECT_THROW(parse_run_config("input_size=30\n", "run.cfg"), ConfigError);
    EXPECT_THROW(parse_run_config("just words\n", "run.cfg"), ConfigError);
}

TEST(RunConfig, LaterOverridesWin)
{
    RunConfig c = parse_run_config("epochs=5\n", "f");
    apply_overrides(c, {"epochs=7", "lr0=0.01", "epochs=9"});
    EXPECT_EQ(c.train.epochs, 9u);
    EXPECT_EQ(c.train.lr0, 0.01);
    EXPECT_THROW(apply_overrides(c, {"epochs"}), ConfigError);
    EXPECT_THROW(apply_overrides(c, {"nope=1"}), ConfigError);
}

TEST(SiblingPath, ReplacesExtension)
{
    EXPECT_EQ(sibling_path("out/model.lusk", ".loss.csv"), "out/model.loss.csv");
    EXPECT_EQ(sibling_path("model", ".loss.csv"), "model.loss.csv");
}

TEST(Markers, ThreeByThreeAtFullIntensityClipped)
{
    Frame f(8, 8);
    const Frame m = draw_markers(f, {{4, 4}, {0, 7}});
    std::size_t lit = 0;
    for (double v : m.px) lit += v == 1.0;
    EXPECT_EQ(lit, 9u + 4u);
    EXPECT_EQ(m(3, 3), 1.0);
    EXPECT_EQ(m(5, 5), 1.0);
    EXPECT_EQ(m(2, 2), 0.0);
}

TEST(Cli, FuseEmitsTenChannels)
{
    const auto dir = fresh_dir("fuse");
    SceneSpec s;
    s.frames = 1;
    save_dataset(generate(s), dir + "/data");
    for (const char* mode : {"fused", "norm"}) {
        const auto out = dir + "/" + mode;
        ASSERT_EQ(run("fuse --in " + dir + "/data/frame_00000.pgm --out " + out + " --tga 1.5 --mode " + mode), 0);
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(out)) n += e.path().extension() == ".pgm";
        EXPECT_EQ(n, 10u) << mode;
    }
    EXPECT_EQ(run("fuse --in " + dir + "/data/frame_00000.pgm --out " + dir + "/x --mode rgb"), 2);
    EXPECT_EQ(run("fuse --in " + dir + "/missing.pgm --out " + dir + "/x"), 3);
}

TEST(Cli, SynthTrainInferEvalPipeline)
{
    const auto dir = fresh_dir("pipeline");
    write_file(dir + "/run.cfg", kTinyConfig);
    const std::string cfg = " --config " + dir + "/run.cfg";
    ASSERT_EQ(run("synth" + cfg + " --out " + dir + "/data"), 0);
    ASSERT_EQ(run("pretrain" + cfg + " --data " + dir + "/data --out " + dir + "/pre.lusk"), 0);
    ASSERT_EQ(run("train" + cfg + " --data " + dir + "/data --init " + dir + "/pre.lusk --out " + dir + "/model.lusk"),
              0);
    EXPECT_TRUE(fs::exists(dir + "/model.loss.csv"));
    EXPECT_EQ(slurp(dir + "/model.trace.txt"), "resize\ntga\nfuse\nssim_gate\nencoder\nkeynet\ntransport\nrefine\n");
    ASSERT_EQ(run("infer --ckpt " + dir + "/model.lusk --data " + dir + "/data --out " + dir + "/pred"), 0);
    std::size_t overlays = 0;
    for (const auto& e : fs::directory_iterator(dir + "/pred")) overlays += e.path().extension() == ".pgm";
    EXPECT_EQ(overlays, 12u);
    ASSERT_EQ(run("eval --pred " + dir + "/pred --truth " + dir + "/data --out " + dir + "/report.txt"), 0);
    const auto report = report_from_text(slurp(dir + "/report.txt"), "report");
    EXPECT_EQ(report.frames_total, 12u);
    EXPECT_EQ(report.delta, 5.0);
    EXPECT_EQ(report.jitter.size(), 3u);
    EXPECT_TRUE(fs::exists(dir + "/report.frames.csv"));

    // A checkpoint whose settings disagree with the configuration is refused.
    EXPECT_EQ(run("train" + cfg + " --set k=4 --data " + dir + "/data --init " + dir + "/pre.lusk --out " + dir +
                  "/other.lusk"),
              2);
}

TEST(Cli, DefaultScheduleInLossCsv)
{
    const auto dir = fresh_dir("schedule");
    write_file(dir + "/run.cfg", std::string(kTinyConfig) + "input_size=16\nepochs=60\nbatch_size=32\nlr0=0.001\npairs=2\n");
    ASSERT_EQ(run("synth --config " + dir + "/run.cfg --out " + dir + "/data"), 0);
    ASSERT_EQ(run("train --config " + dir + "/run.cfg --data " + dir + "/data --out " + dir + "/m.lusk"), 0);
    std::istringstream csv(slurp(dir + "/m.loss.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "epoch,mean_loss,lr");
    TrainConfig defaults;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        const auto last = line.rfind(',');
        EXPECT_EQ(line.substr(last + 1), format_double(lr_at(rows, defaults))) << line;
        EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(rows));
        ++rows;
    }
    EXPECT_EQ(rows, 60u);
}

TEST(Cli, SameSeedGivesByteIdenticalOutputs)
{
    const auto dir = fresh_dir("seed");
    write_file(dir + "/run.cfg", kTinyConfig);
    const std::string cfg = " --config " + dir + "/run.cfg --seed 11";
    for (const char* tag : {"a", "b"}) {
        const std::string d = dir + "/" + tag;
        ASSERT_EQ(run("synth" + cfg + " --out " + d + "/data"), 0);
        ASSERT_EQ(run("train" + cfg + " --data " + d + "/data --out " + d + "/m.lusk"), 0);
        ASSERT_EQ(run("infer --ckpt " + d + "/m.lusk --data " + d + "/data --out " + d + "/pred"), 0);
    }
    for (const char* f : {"data/frame_00003.pgm", "data/truth.txt", "m.lusk", "m.loss.csv", "pred/keypoints.csv"}) {
        EXPECT_EQ(slurp(dir + "/a/" + f), slurp(dir + "/b/" + f)) << f;
    }
    ASSERT_EQ(run("synth --config " + dir + "/run.cfg --seed 12 --out " + dir + "/c"), 0);
    EXPECT_NE(slurp(dir + "/a/data/frame_00003.pgm"), slurp(dir + "/c/frame_00003.pgm"));
}

TEST(Cli, ExitCodes)
{
    const auto dir = fresh_dir("codes");
    write_file(dir + "/bad.cfg", "k=3\nmystery=1\n");
    EXPECT_EQ(run("synth --config " + dir + "/bad.cfg --out " + dir + "/x"), 2);
    EXPECT_EQ(run("synth --config " + dir + "/absent.cfg --out " + dir + "/x"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("train --data " + dir + "/nothing --out " + dir + "/m.lusk"), 3);
    EXPECT_EQ(run("eval --pred " + dir + " --truth " + dir + " --out " + dir + "/r.txt"), 3);

    // A checkpoint holding a NaN weight makes the first loss non-finite.
    write_file(dir + "/run.cfg", kTinyConfig);
    ASSERT_EQ(run("synth --config " + dir + "/run.cfg --out " + dir + "/data"), 0);
    RunConfig cfg = parse_run_config(kTinyConfig, "tiny");
    auto m = make_model<float>(cfg.model_config(), cfg.preprocess_config(), 1);
    m.params.at("refine.out.bias").values_mut()[0] = std::numeric_limits<float>::quiet_NaN();
    save_model(dir + "/nan.lusk", m);
    EXPECT_EQ(run("train --config " + dir + "/run.cfg --data " + dir + "/data --init " + dir + "/nan.lusk --out " +
                  dir + "/m.lusk"),
              4);
}
