#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "manip/errors.hpp"
#include "manip/skills.hpp"

using namespace manip;

namespace {

WorldSummary summary_with(std::vector<SummaryObject> objects, Pose ee = {0.5, 0.5, 0.1},
                          bool closed = false, bool held = false) {
    WorldSummary w;
    w.bounds = {{0.0, 0.0, 0.0}, {1.0, 1.0, 0.5}};
    w.home = ee;
    w.robot.ee = ee;
    w.robot.gripper_closed = closed;
    if (held) w.robot.held = "cube_red";
    w.objects = std::move(objects);
    return w;
}

SummaryObject obstacle_at(Pose p, const std::string& id) {
    SummaryObject o;
    o.id = id;
    o.shape = Shape::obstacle;
    o.color = Color::yellow;
    o.half_extent = 0.05;
    o.pose = p;
    return o;
}

// Bias-only net: zero weights make the output the output-layer bias.
PolicyCheckpoint bias_checkpoint(Algo algo, const std::string& skill, int obs_dim, int act_dim,
                                 const Vector& out_bias) {
    PolicyCheckpoint ck;
    ck.algo = algo;
    ck.obs_dim = obs_dim;
    ck.action_dim = act_dim;
    ck.skill = skill;
    ck.seed = 1;
    const int width = static_cast<int>(out_bias.size());
    ck.net = MlpParams::xavier_init({obs_dim, width}, 7);
    ck.net.weights[0].setZero();
    ck.net.biases[0] = out_bias;
    if (algo == Algo::ppo) ck.log_std = Vector::Constant(act_dim, -2.0);
    return ck;
}

Vector skill_obs_near_target(double dist, bool held) {
    Vector o = Vector::Zero(kSkillObsDim);
    o[1] = held ? 1.0 : 0.0;
    o[5] = dist;
    return o;
}

}  // namespace

// ===========================================================================
// observation assembly
// ===========================================================================

TEST_CASE("skill observation packs gripper flags and ee-relative vectors") {
    WorldSummary w = summary_with({obstacle_at({0.7, 0.5, 0.1}, "near"),
                                   obstacle_at({0.1, 0.1, 0.1}, "far")},
                                  {0.5, 0.5, 0.1}, true, true);
    const Vector o = skill_observation(w, Pose{0.9, 0.4, 0.3});
    REQUIRE(o.size() == kSkillObsDim);
    CHECK(o[0] == 1.0);
    CHECK(o[1] == 1.0);
    // nearest of the two obstacles, relative to the ee
    CHECK(o[2] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(o[3] == 0.0);
    CHECK(o[4] == 0.0);
    CHECK(o[5] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(o[6] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(o[7] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("no obstacle in the scene maps to the sentinel slot") {
    SummaryObject cube;
    cube.id = "cube_red";
    cube.shape = Shape::cube;
    cube.pose = {0.2, 0.2, 0.02};
    const Vector o = skill_observation(summary_with({cube}), Pose{0.5, 0.5, 0.1});
    CHECK(o[2] == kObstacleSentinel);
    CHECK(o[3] == kObstacleSentinel);
    CHECK(o[4] == kObstacleSentinel);
    CHECK(o[0] == 0.0);
}

// ===========================================================================
// gripper rules
// ===========================================================================

TEST_CASE("only the grasp skill closes, and only within the attach radius") {
    const Vec3 still{0.0, 0.0, 0.0};
    const Vector near_obs = skill_obs_near_target(Env::kGraspTol - 1e-6, false);
    const Vector far_obs = skill_obs_near_target(Env::kGraspTol + 1e-3, false);
    CHECK(skill_grip(SkillId::grasp, near_obs, still) == GripCmd::close);
    CHECK(skill_grip(SkillId::grasp, far_obs, still) == GripCmd::hold);
    CHECK(skill_grip(SkillId::reach, near_obs, still) == GripCmd::hold);
    CHECK(skill_grip(SkillId::avoid_reach, near_obs, still) == GripCmd::hold);
    // already holding: nothing to close on
    CHECK(skill_grip(SkillId::grasp, skill_obs_near_target(0.0, true), still) == GripCmd::hold);
}

TEST_CASE("the grip rule judges the post-move distance, not the current one") {
    // target sits 0.04 ahead on x: too far right now, inside the attach
    // radius once this step's 0.03 of motion lands
    const Vector obs = skill_obs_near_target(0.04, false);
    CHECK(skill_grip(SkillId::grasp, obs, Vec3{0.0, 0.0, 0.0}) == GripCmd::hold);
    CHECK(skill_grip(SkillId::grasp, obs, Vec3{0.03, 0.0, 0.0}) == GripCmd::close);
    // and an in-range target the step carries back out is left alone
    const Vector close_obs = skill_obs_near_target(0.02, false);
    CHECK(skill_grip(SkillId::grasp, close_obs, Vec3{-0.03, 0.0, 0.0}) == GripCmd::hold);
}

TEST_CASE("the place skill releases close to the rest pose while holding") {
    const Vec3 still{0.0, 0.0, 0.0};
    CHECK(skill_grip(SkillId::place, skill_obs_near_target(0.01, true), still) == GripCmd::open);
    CHECK(skill_grip(SkillId::place, skill_obs_near_target(0.05, true), still) == GripCmd::hold);
    CHECK(skill_grip(SkillId::place, skill_obs_near_target(0.01, false), still) == GripCmd::hold);
    CHECK_THROWS_AS(skill_grip(SkillId::place, Vector::Zero(4), still), DimensionMismatch);
}

// ===========================================================================
// seeding and practice scenes
// ===========================================================================

TEST_CASE("seed mixing is stable and spreads") {
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 64; ++s) {
        seen.insert(mix_seed(42, s));
        seen.insert(mix_seed(43, s));
    }
    CHECK(seen.size() == 128);
}

TEST_CASE("practice scenes are reproducible per episode and vary across episodes") {
    const EnvFactory fa = skill_env_factory(SkillId::grasp, 9);
    const EnvFactory fb = skill_env_factory(SkillId::grasp, 9);
    Env a = fa(3);
    Env b = fb(3);
    CHECK(a.world_summary().to_json_text() == b.world_summary().to_json_text());
    CHECK(distance(a.target(), b.target()) == 0.0);

    Env c = fa(4);
    CHECK(a.world_summary().to_json_text() != c.world_summary().to_json_text());

    const EnvFactory other_seed = skill_env_factory(SkillId::grasp, 10);
    Env d = other_seed(3);
    CHECK(a.world_summary().to_json_text() != d.world_summary().to_json_text());
}

TEST_CASE("every practice scene validates and matches its skill") {
    for (const SkillId skill :
         {SkillId::reach, SkillId::grasp, SkillId::place, SkillId::avoid_reach}) {
        const EnvFactory f = skill_env_factory(skill, 123);
        for (int ep = 0; ep < 25; ++ep) {
            Env env = f(ep);  // construction validates the scenario
            const WorldSummary w = env.world_summary();
            CHECK(w.bounds.contains(env.target(), 1e-9));
            switch (skill) {
                case SkillId::reach:
                    CHECK(w.objects.empty());
                    CHECK(distance(w.robot.ee, env.target()) >= 0.1);
                    break;
                case SkillId::grasp:
                    CHECK(w.find("cube_red") != nullptr);
                    CHECK_FALSE(w.robot.held.has_value());
                    break;
                case SkillId::place: {
                    REQUIRE(w.robot.held.has_value());
                    const SummaryObject* plat = w.find("platform_blue");
                    REQUIRE(plat != nullptr);
                    // shaping target is the skill aim over the cube's rest pose
                    const Pose rest{plat->pose.x, plat->pose.y,
                                    plat->pose.z + plat->half_extent + 0.02};
                    const Pose aim = skill_aim(SkillId::place, rest);
                    CHECK(env.target().x == doctest::Approx(aim.x).epsilon(1e-12));
                    CHECK(env.target().y == doctest::Approx(aim.y).epsilon(1e-12));
                    CHECK(env.target().z == doctest::Approx(aim.z).epsilon(1e-12));
                    CHECK(aim.z > rest.z);
                    CHECK(distance_xy(w.robot.ee, plat->pose) >= 0.1);
                    break;
                }
                case SkillId::avoid_reach: {
                    const SummaryObject* wall = w.find("obstacle_mid");
                    REQUIRE(wall != nullptr);
                    CHECK(wall->shape == Shape::obstacle);
                    // wall sits between start and target in x
                    CHECK(w.robot.ee.x < wall->pose.x);
                    CHECK(env.target().x > wall->pose.x);
                    break;
                }
            }
        }
    }
}

// ===========================================================================
// checkpoint-driven actions
// ===========================================================================

TEST_CASE("deterministic action is the forward pass plus the skill rule") {
    Vector bias(3);
    bias << 0.02, -0.3, 0.004;
    const PolicyCheckpoint ck = bias_checkpoint(Algo::ppo, "reach", kSkillObsDim, 3, bias);
    const Vector obs = skill_obs_near_target(0.5, false);
    const Action a = act(ck, obs);
    CHECK(a.delta.x == doctest::Approx(std::tanh(0.02) * Env::kMaxStep).epsilon(1e-12));
    CHECK(a.delta.y == doctest::Approx(std::tanh(-0.3) * Env::kMaxStep).epsilon(1e-12));
    CHECK(a.delta.z == doctest::Approx(std::tanh(0.004) * Env::kMaxStep).epsilon(1e-12));
    CHECK(a.grip == GripCmd::hold);

    const PolicyCheckpoint grasp_ck = bias_checkpoint(Algo::ppo, "grasp", kSkillObsDim, 3, bias);
    CHECK(act(grasp_ck, skill_obs_near_target(0.01, false)).grip == GripCmd::close);
}

TEST_CASE("off-policy checkpoints squash and rescale to the step limit") {
    Vector bias(6);  // [mean, log_std] head
    bias << 5.0, -5.0, 0.0, 0.0, 0.0, 0.0;
    const PolicyCheckpoint ck = bias_checkpoint(Algo::sac, "reach", kSkillObsDim, 3, bias);
    const Action a = act(ck, skill_obs_near_target(0.5, false));
    CHECK(a.delta.x == doctest::Approx(std::tanh(5.0) * Env::kMaxStep).epsilon(1e-12));
    CHECK(a.delta.y == doctest::Approx(-std::tanh(5.0) * Env::kMaxStep).epsilon(1e-12));
    CHECK(a.delta.z == 0.0);
    CHECK(std::abs(a.delta.x) < Env::kMaxStep);
}

TEST_CASE("flat checkpoints drive the gripper from the fourth channel") {
    for (const auto& [channel, want] :
         std::vector<std::pair<double, GripCmd>>{{0.9, GripCmd::close},
                                                 {-0.9, GripCmd::open},
                                                 {0.0, GripCmd::hold}}) {
        Vector bias(4);
        bias << 0.01, 0.0, 0.0, channel;
        const PolicyCheckpoint ck = bias_checkpoint(Algo::ppo, "flat", 14, 4, bias);
        CHECK(act(ck, Vector::Zero(14)).grip == want);
    }
}

TEST_CASE("action rejects mismatched observations and missing rng") {
    const PolicyCheckpoint ck =
        bias_checkpoint(Algo::ppo, "reach", kSkillObsDim, 3, Vector::Zero(3));
    CHECK_THROWS_AS(act(ck, Vector::Zero(5)), DimensionMismatch);
    CHECK_THROWS_AS(act(ck, Vector::Zero(kSkillObsDim), false, nullptr), ConfigError);
}

TEST_CASE("stochastic actions are reproducible under a shared stream") {
    const PolicyCheckpoint ck =
        bias_checkpoint(Algo::ppo, "reach", kSkillObsDim, 3, Vector::Zero(3));
    const Vector obs = skill_obs_near_target(0.4, false);
    std::mt19937_64 r1(3), r2(3), r3(4);
    const Action a = act(ck, obs, false, &r1);
    const Action b = act(ck, obs, false, &r2);
    const Action c = act(ck, obs, false, &r3);
    CHECK(a.delta.x == b.delta.x);
    CHECK(a.delta.y == b.delta.y);
    CHECK(a.delta.z == b.delta.z);
    CHECK(a.delta.x != c.delta.x);
    CHECK(a.delta.x != 0.0);  // noise applied
}

// ===========================================================================
// training
// ===========================================================================

TEST_CASE("zero episodes returns the untrained policy and no curve") {
    const EnvFactory f = skill_env_factory(SkillId::reach, 5);
    const TrainResult ppo = train_skill(f, SkillId::reach, Algo::ppo, 0, 5);
    CHECK(ppo.curve.empty());
    CHECK(ppo.checkpoint.algo == Algo::ppo);
    CHECK(ppo.checkpoint.obs_dim == kSkillObsDim);
    CHECK(ppo.checkpoint.action_dim == 3);
    CHECK(ppo.checkpoint.skill == "reach");
    CHECK(ppo.checkpoint.seed == 5);
    CHECK(ppo.checkpoint.log_std.size() == 3);

    const TrainResult sac = train_skill(f, SkillId::reach, Algo::sac, 0, 5);
    CHECK(sac.checkpoint.algo == Algo::sac);
    CHECK(sac.checkpoint.log_std.size() == 0);
    CHECK(sac.checkpoint.net.output_dim() == 6);  // mean and log_std head
    CHECK_THROWS_AS(train_skill(f, SkillId::reach, Algo::ppo, -1, 5), ConfigError);
}

TEST_CASE("an on-policy run fills the curve and learns the reach shaping") {
    TrainOptions opts;
    opts.ppo.horizon = 200;
    const EnvFactory f = skill_env_factory(SkillId::reach, 11);
    const TrainResult r = train_skill(f, SkillId::reach, Algo::ppo, 100, 11, opts);

    REQUIRE(r.curve.size() == 100);
    for (int i = 0; i < 100; ++i) {
        CHECK(r.curve[i].episode == i);
        CHECK(r.curve[i].steps >= 1);
        CHECK(r.curve[i].steps <= 100);
        CHECK(std::isfinite(r.curve[i].cumulative_reward));
        if (r.curve[i].success) CHECK(r.curve[i].steps <= 100);
    }
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += r.curve[i].cumulative_reward / 10.0;
        last += r.curve[90 + i].cumulative_reward / 10.0;
    }
    INFO("first ", first, " last ", last);
    CHECK(last > first + 1.0);
}

TEST_CASE("the grasp skill learns to convert approach into attachment") {
    const EnvFactory f = skill_env_factory(SkillId::grasp, 11);
    const TrainResult r = train_skill(f, SkillId::grasp, Algo::ppo, 100, 11);
    REQUIRE(r.curve.size() == 100);
    int last10 = 0;
    for (int i = 90; i < 100; ++i) last10 += r.curve[i].success;
    INFO("successes in the last 10 episodes: ", last10);
    CHECK(last10 >= 8);
}

TEST_CASE("the place skill learns to drop the carried object onto the platform") {
    const EnvFactory f = skill_env_factory(SkillId::place, 11);
    const TrainResult r = train_skill(f, SkillId::place, Algo::ppo, 150, 11);
    REQUIRE(r.curve.size() == 150);
    int last50 = 0;
    for (int i = 100; i < 150; ++i) last50 += r.curve[i].success;
    INFO("successes in the last 50 episodes: ", last50);
    CHECK(last50 >= 20);
}

TEST_CASE("identical training runs are bit-identical, different seeds diverge") {
    TrainOptions opts;
    opts.ppo.hidden = {8};
    opts.ppo.horizon = 150;
    opts.ppo.epochs = 2;
    const EnvFactory f = skill_env_factory(SkillId::reach, 21);
    const TrainResult a = train_skill(f, SkillId::reach, Algo::ppo, 8, 21, opts);
    const TrainResult b = train_skill(f, SkillId::reach, Algo::ppo, 8, 21, opts);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].cumulative_reward == b.curve[i].cumulative_reward);
        CHECK(a.curve[i].steps == b.curve[i].steps);
        CHECK(a.curve[i].success == b.curve[i].success);
    }
    for (std::size_t l = 0; l < a.checkpoint.net.layer_count(); ++l)
        CHECK(a.checkpoint.net.weights[l] == b.checkpoint.net.weights[l]);
    CHECK(a.checkpoint.log_std == b.checkpoint.log_std);

    const TrainResult c = train_skill(f, SkillId::reach, Algo::ppo, 8, 22, opts);
    CHECK(a.checkpoint.net.weights[0] != c.checkpoint.net.weights[0]);
}

TEST_CASE("trained checkpoints act identically after a save and load round trip") {
    TrainOptions opts;
    opts.ppo.hidden = {8};
    opts.ppo.horizon = 100;
    opts.ppo.epochs = 2;
    const EnvFactory f = skill_env_factory(SkillId::grasp, 31);
    const TrainResult r = train_skill(f, SkillId::grasp, Algo::ppo, 4, 31, opts);

    const std::string path = "build/test_skill_ck.bin";
    r.checkpoint.save(path);
    const PolicyCheckpoint loaded = PolicyCheckpoint::load(path);
    CHECK(loaded.skill == "grasp");
    Env env = f(2);
    const Vector obs = skill_observation(env.world_summary(), env.target());
    const Action a = act(r.checkpoint, obs);
    const Action b = act(loaded, obs);
    CHECK(a.delta.x == b.delta.x);
    CHECK(a.delta.y == b.delta.y);
    CHECK(a.delta.z == b.delta.z);
    CHECK(a.grip == b.grip);
    std::remove(path.c_str());
}

TEST_CASE("a short off-policy run fills the curve and stays in bounds") {
    TrainOptions opts;
    opts.sac.hidden = {16};
    opts.sac.batch = 64;
    opts.sac.warmup_steps = 150;
    opts.sac.update_every = 4;
    const EnvFactory f = skill_env_factory(SkillId::reach, 41);
    const TrainResult r = train_skill(f, SkillId::reach, Algo::sac, 8, 41, opts);
    REQUIRE(r.curve.size() == 8);
    for (const auto& p : r.curve) {
        CHECK(p.steps >= 1);
        CHECK(p.steps <= 100);
        CHECK(std::isfinite(p.cumulative_reward));
    }
    CHECK(r.checkpoint.algo == Algo::sac);
    // deterministic actions from the head respect the per-step limit
    Env env = f(0);
    const Vector obs = skill_observation(env.world_summary(), env.target());
    const Action a = act(r.checkpoint, obs);
    CHECK(std::abs(a.delta.x) < Env::kMaxStep);
    CHECK(std::abs(a.delta.y) < Env::kMaxStep);
    CHECK(std::abs(a.delta.z) < Env::kMaxStep);
}

TEST_CASE("the monolithic baseline trains on the raw scenario observation") {
    const ScenarioSpec spec = load_scenario("scenarios/pick_place.json");
    TrainOptions opts;
    opts.ppo.hidden = {16};
    opts.ppo.horizon = 300;
    opts.ppo.epochs = 2;
    const TrainResult r = train_flat(spec, Algo::ppo, 5, 3, opts);
    REQUIRE(r.curve.size() == 5);
    CHECK(r.checkpoint.skill == "flat");
    CHECK(r.checkpoint.obs_dim == 8 + 3 * 2);
    CHECK(r.checkpoint.action_dim == 4);

    // runs through act() against the same scenario
    Env env(spec, 99, RewardMode::final_goal_only);
    const Action a = act(r.checkpoint, to_vector(env.observe()));
    CHECK(std::isfinite(a.delta.x));
}
