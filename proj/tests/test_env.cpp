#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "manip/env.hpp"
#include "manip/errors.hpp"
#include "manip/trace.hpp"

using namespace manip;

namespace {

ScenarioSpec pick_place() { return load_scenario("scenarios/pick_place.json"); }

// Minimal single-goal scenario used by the reward arithmetic tests.
ScenarioSpec reach_scenario(Pose start, Pose target) {
    ScenarioSpec s;
    s.name = "reach_test";
    s.bounds = {{0, 0, 0}, {1, 1, 0.5}};
    s.ee_start = start;
    s.goal = EeNear{target, 0.02};
    s.max_steps = 100;
    return s;
}

ObjectSpec cube(const std::string& id, Color c, Pose p) {
    ObjectSpec o;
    o.id = id;
    o.shape = Shape::cube;
    o.color = c;
    o.half_extent = 0.02;
    o.pose = p;
    o.graspable = true;
    return o;
}

ObjectSpec platform(const std::string& id, Color c, Pose p) {
    ObjectSpec o;
    o.id = id;
    o.shape = Shape::platform;
    o.color = c;
    o.half_extent = 0.04;
    o.pose = p;
    o.graspable = false;
    return o;
}

ObjectSpec obstacle(const std::string& id, Pose p, double half) {
    ObjectSpec o;
    o.id = id;
    o.shape = Shape::obstacle;
    o.color = Color::yellow;
    o.half_extent = half;
    o.pose = p;
    o.graspable = false;
    return o;
}

}  // namespace

// ============================================================================
// construction / reset
// ============================================================================

TEST_CASE("env construction from the shipped pick-and-place scenario") {
    Env env(pick_place(), 7);
    CHECK(env.step_count() == 0);
    CHECK_FALSE(env.done());
    CHECK(env.observation_dim() == 14);

    const Observation obs = env.observe();
    REQUIRE(obs.size() == 14);
    CHECK(obs[0] == doctest::Approx(0.1));
    CHECK(obs[1] == doctest::Approx(0.1));
    CHECK(obs[2] == doctest::Approx(0.2));
    CHECK(obs[3] == 0.0);  // gripper open
    CHECK(obs[4] == 0.0);  // nothing held
    // cube relative position
    CHECK(obs[5] == doctest::Approx(0.6));
    CHECK(obs[6] == doctest::Approx(0.2));
    CHECK(obs[7] == doctest::Approx(-0.18));
    // default shaping target is the platform top
    CHECK(obs[11] == doctest::Approx(0.3 - 0.1));
    CHECK(obs[12] == doctest::Approx(0.7 - 0.1));
    CHECK(obs[13] == doctest::Approx(0.04 + 0.04 - 0.2));
}

TEST_CASE("duplicate object id rejected") {
    ScenarioSpec s = pick_place();
    s.objects.push_back(s.objects.front());
    CHECK_THROWS_AS(Env(s, 0), InvalidScenario);
}

TEST_CASE("graspable platform rejected") {
    ScenarioSpec s = pick_place();
    for (auto& o : s.objects)
        if (o.shape == Shape::platform) o.graspable = true;
    CHECK_THROWS_AS(Env(s, 0), InvalidScenario);
}

TEST_CASE("same scenario and seed give identical initial observations") {
    Env a(pick_place(), 7);
    Env b(pick_place(), 7);
    CHECK(a.observe() == b.observe());
}

TEST_CASE("reset restores the world after arbitrary steps") {
    Env env(pick_place(), 3);
    const Observation initial = env.observe();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    for (int i = 0; i < 40 && !env.done(); ++i) {
        Action a;
        a.delta = {d(rng), d(rng), d(rng)};
        a.grip = i % 7 == 0 ? GripCmd::close : GripCmd::hold;
        env.step(a);
    }
    CHECK(env.reset() == initial);
    CHECK(env.step_count() == 0);
    // idempotent
    CHECK(env.reset() == initial);
}

TEST_CASE("reset undoes a fired perturbation") {
    ScenarioSpec s = pick_place();
    s.perturbations.push_back({2, "cube_red", {0.2, 0.2, 0.02}});
    Env env(s, 1);
    for (int i = 0; i < 3; ++i) env.step({});
    CHECK(env.find_object("cube_red")->pose.x == doctest::Approx(0.2));
    env.reset();
    Env fresh(s, 1);
    CHECK(env.find_object("cube_red")->pose == fresh.find_object("cube_red")->pose);
    CHECK(env.observe() == fresh.observe());
}

TEST_CASE("start_holding attaches the object at reset") {
    ScenarioSpec s = pick_place();
    s.start_holding = "cube_red";
    Env env(s, 0);
    CHECK(env.robot().held == "cube_red");
    CHECK(env.robot().gripper_closed);
    CHECK(env.find_object("cube_red")->pose == env.robot().ee);
}

// ============================================================================
// step: motion, reward arithmetic
// ============================================================================

TEST_CASE("zero action leaves the pose unchanged and costs one time penalty") {
    Env env(pick_place(), 0);
    const Pose before = env.robot().ee;
    const StepResult r = env.step({});
    CHECK(env.robot().ee == before);
    CHECK(r.reward == doctest::Approx(-Env::kWeightTime).epsilon(1e-12));
    CHECK_FALSE(r.done);
    CHECK_FALSE(r.info.collision);
}

TEST_CASE("step toward the target scores higher than a step away") {
    const Pose start{0.5, 0.5, 0.1};
    const Pose goal{0.8, 0.5, 0.1};

    Env toward(reach_scenario(start, goal), 0);
    const double d0 = distance(start, goal);
    const StepResult rt = toward.step({{0.05, 0, 0}, GripCmd::hold});
    const double d1 = distance(Pose{0.55, 0.5, 0.1}, goal);
    const double expected_toward = -Env::kWeightDist * (d1 - d0) - Env::kWeightTime;
    CHECK(rt.reward == doctest::Approx(expected_toward).epsilon(1e-12));

    Env away(reach_scenario(start, goal), 0);
    const StepResult ra = away.step({{-0.05, 0, 0}, GripCmd::hold});
    const double d1b = distance(Pose{0.45, 0.5, 0.1}, goal);
    const double expected_away = -Env::kWeightDist * (d1b - d0) - Env::kWeightTime;
    CHECK(ra.reward == doctest::Approx(expected_away).epsilon(1e-12));

    CHECK(rt.reward > ra.reward);
}

TEST_CASE("delta is clamped per component") {
    Env env(reach_scenario({0.5, 0.5, 0.1}, {0.9, 0.5, 0.1}), 0);
    env.step({{10.0, -10.0, 0.0}, GripCmd::hold});
    CHECK(env.robot().ee.x == doctest::Approx(0.55));
    CHECK(env.robot().ee.y == doctest::Approx(0.45));
}

TEST_CASE("motion is clamped to the workspace bounds") {
    Env env(reach_scenario({0.02, 0.5, 0.48}, {0.9, 0.5, 0.1}), 0);
    env.step({{-0.05, 0.0, 0.05}, GripCmd::hold});
    CHECK(env.robot().ee.x == 0.0);
    CHECK(env.robot().ee.z == 0.5);
}

// ============================================================================
// step: grasp / release
// ============================================================================

TEST_CASE("close attaches the nearest graspable object within tolerance") {
    ScenarioSpec s = reach_scenario({0.5, 0.5, 0.1}, {0.9, 0.5, 0.1});
    s.objects.push_back(cube("near", Color::red, {0.52, 0.5, 0.1}));
    s.objects.push_back(cube("far", Color::green, {0.47, 0.5, 0.1}));  // 0.03 away but farther
    Env env(s, 0);
    const StepResult r = env.step({{0, 0, 0}, GripCmd::close});
    CHECK(env.robot().held == "near");
    CHECK(env.robot().gripper_closed);
    CHECK(r.info.grasped_this_step);
    // exact attachment
    CHECK(distance(env.find_object("near")->pose, env.robot().ee) == 0.0);
}

TEST_CASE("close beyond the grasp tolerance attaches nothing") {
    ScenarioSpec s = reach_scenario({0.5, 0.5, 0.1}, {0.9, 0.5, 0.1});
    s.objects.push_back(cube("far", Color::red, {0.54, 0.5, 0.1}));  // 0.04 away
    Env env(s, 0);
    env.step({{0, 0, 0}, GripCmd::close});
    CHECK_FALSE(env.robot().held.has_value());
    CHECK(env.robot().gripper_closed);  // gripper still closes on air
}

TEST_CASE("grasp bonus and goal bonus appear in the step reward") {
    ScenarioSpec s;
    s.name = "grasp_test";
    s.bounds = {{0, 0, 0}, {1, 1, 0.5}};
    s.ee_start = {0.5, 0.5, 0.1};
    s.objects.push_back(cube("c", Color::red, {0.52, 0.5, 0.1}));
    s.goal = Holding{"c"};
    s.max_steps = 50;
    Env env(s, 0);
    const double d0 = distance(s.ee_start, s.objects[0].pose);
    const StepResult r = env.step({{0, 0, 0}, GripCmd::close});
    // after attach the object sits on the ee, so the target distance is zero
    const double expected = -Env::kWeightDist * (0.0 - d0) - Env::kWeightTime +
                            Env::kBonusGrasp + Env::kBonusGoal;
    CHECK(r.reward == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.done);
    CHECK(r.info.goal);
}

TEST_CASE("held object follows the ee exactly") {
    ScenarioSpec s = reach_scenario({0.5, 0.5, 0.1}, {0.9, 0.5, 0.1});
    s.objects.push_back(cube("c", Color::red, {0.52, 0.5, 0.1}));
    Env env(s, 0);
    env.step({{0, 0, 0}, GripCmd::close});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-0.05, 0.05);
    for (int i = 0; i < 25 && !env.done(); ++i) {
        env.step({{d(rng), d(rng), d(rng)}, GripCmd::hold});
        CHECK(distance(env.find_object("c")->pose, env.robot().ee) == 0.0);
    }
}

TEST_CASE("open drops the object onto the highest support below") {
    ScenarioSpec s;
    s.name = "drop_test";
    s.bounds = {{0, 0, 0}, {1, 1, 0.5}};
    s.ee_start = {0.5, 0.5, 0.3};
    s.objects.push_back(cube("c", Color::red, {0.5, 0.5, 0.3}));
    s.objects.push_back(platform("p", Color::blue, {0.5, 0.5, 0.04}));
    s.start_holding = "c";
    s.goal = EeNear{{0.9, 0.9, 0.1}, 0.01};
    s.max_steps = 50;

    SUBCASE("over a platform the object rests on its top") {
        Env env(s, 0);
        env.step({{0, 0, 0}, GripCmd::open});
        const double rest = 0.04 + 0.04 + 0.02;  // platform top + cube half extent
        CHECK(env.find_object("c")->pose.z == doctest::Approx(rest).epsilon(1e-12));
        CHECK_FALSE(env.robot().held.has_value());
        CHECK_FALSE(env.robot().gripper_closed);
    }

    SUBCASE("over bare table the object rests on the table") {
        s.objects[1].pose = {0.2, 0.2, 0.04};  // move the platform away
        Env env(s, 0);
        env.step({{0, 0, 0}, GripCmd::open});
        CHECK(env.find_object("c")->pose.z == doctest::Approx(0.02).epsilon(1e-12));
    }
}

// ============================================================================
// collisions
// ============================================================================

TEST_CASE("obstacle blocks the offending component and flags the collision") {
    ScenarioSpec s = reach_scenario({0.3, 0.45, 0.08}, {0.9, 0.45, 0.08});
    s.objects.push_back(obstacle("rock", {0.45, 0.45, 0.08}, 0.08));
    Env env(s, 0);

    StepResult r1 = env.step({{0.05, 0, 0}, GripCmd::hold});
    CHECK_FALSE(r1.info.collision);  // 0.35 is still outside the inflated box
    CHECK(env.robot().ee.x == doctest::Approx(0.35));

    StepResult r2 = env.step({{0.05, 0, 0}, GripCmd::hold});
    CHECK(r2.info.collision);
    CHECK(env.robot().ee.x == doctest::Approx(0.35));  // blocked axis keeps its coordinate
}

TEST_CASE("two blocked components cost exactly one collision penalty") {
    ScenarioSpec s = reach_scenario({0.5, 0.5, 0.1}, {0.5, 0.5, 0.45});
    s.objects.push_back(obstacle("right", {0.6, 0.5, 0.1}, 0.05));
    s.objects.push_back(obstacle("above", {0.5, 0.6, 0.1}, 0.05));
    Env env(s, 0);
    const StepResult r = env.step({{0.05, 0.05, 0.0}, GripCmd::hold});
    CHECK(r.info.collision);
    CHECK(env.robot().ee.x == doctest::Approx(0.5));
    CHECK(env.robot().ee.y == doctest::Approx(0.5));
    // no motion, so the shaped reward is exactly time + one collision penalty
    CHECK(r.reward == doctest::Approx(-Env::kWeightTime - Env::kWeightCollision).epsilon(1e-12));
}

TEST_CASE("sliding along an obstacle face is permitted") {
    ScenarioSpec s = reach_scenario({0.35, 0.3, 0.08}, {0.35, 0.9, 0.08});
    s.objects.push_back(obstacle("rock", {0.45, 0.45, 0.08}, 0.08));
    Env env(s, 0);
    // hug the -x face and move in +y; y motion must not be blocked
    const StepResult r = env.step({{0.0, 0.05, 0.0}, GripCmd::hold});
    CHECK_FALSE(r.info.collision);
    CHECK(env.robot().ee.y == doctest::Approx(0.35));
}

// ============================================================================
// goals
// ============================================================================

TEST_CASE("object_on goal: centered and at rest height is satisfied") {
    ScenarioSpec s;
    s.name = "on_test";
    s.bounds = {{0, 0, 0}, {1, 1, 0.5}};
    s.ee_start = {0.1, 0.1, 0.2};
    s.objects.push_back(cube("c", Color::red, {0.5, 0.5, 0.1}));
    s.objects.push_back(platform("p", Color::blue, {0.5, 0.5, 0.04}));
    s.goal = ObjectOn{"c", "p", 0.02};
    s.max_steps = 10;

    SUBCASE("satisfied when resting centered") {
        s.objects[0].pose = {0.5, 0.5, 0.04 + 0.04 + 0.02};
        Env env(s, 0);
        CHECK(env.check_goal());
    }
    SUBCASE("5 cm off centre fails a 2 cm tolerance") {
        s.objects[0].pose = {0.55, 0.5, 0.04 + 0.04 + 0.02};
        Env env(s, 0);
        CHECK_FALSE(env.check_goal());
    }
    SUBCASE("hovering above the platform fails") {
        s.objects[0].pose = {0.5, 0.5, 0.3};
        Env env(s, 0);
        CHECK_FALSE(env.check_goal());
    }
}

TEST_CASE("sorted goal checked by per-object enumeration") {
    ScenarioSpec s = load_scenario("scenarios/sort_3.json");
    // Place every cube at rest on its color's platform.
    const Sorted& goal = std::get<Sorted>(s.goal);
    for (auto& o : s.objects) {
        if (!o.graspable) continue;
        const ObjectSpec* plat = s.find(goal.platform_for_color.at(o.color));
        o.pose = {plat->pose.x, plat->pose.y, plat->pose.z + plat->half_extent + o.half_extent};
    }
    Env env(s, 0);

    // independent enumeration of the same predicate
    bool expected = true;
    for (const auto& o : env.objects()) {
        if (!o.graspable) continue;
        const ObjectSpec* plat = env.find_object(goal.platform_for_color.at(o.color));
        const bool on = distance_xy(o.pose, plat->pose) <= goal.tol &&
                        std::abs(o.pose.z - (plat->pose.z + plat->half_extent + o.half_extent)) <=
                            goal.tol;
        expected = expected && on;
    }
    CHECK(expected);
    CHECK(env.check_goal() == expected);

    // displace one cube; both evaluations must flip
    Env moved(s, 0);
    ScenarioSpec s2 = s;
    s2.objects[0].pose.x += 0.1;
    Env env2(s2, 0);
    CHECK_FALSE(env2.check_goal());
}

TEST_CASE("ee_near goal ends the episode with the goal bonus") {
    Env env(reach_scenario({0.5, 0.5, 0.1}, {0.54, 0.5, 0.1}), 0);
    const StepResult r = env.step({{0.05, 0, 0}, GripCmd::hold});
    CHECK(r.info.goal);
    CHECK(r.done);
    CHECK(r.reward > Env::kBonusGoal - 1.0);
}

// ============================================================================
// perturbations
// ============================================================================

TEST_CASE("perturbation fires on its scheduled step, after motion") {
    ScenarioSpec s = pick_place();
    s.perturbations.push_back({5, "cube_red", {0.2, 0.2, 0.02}});
    Env env(s, 0);
    for (int i = 0; i < 5; ++i) {
        const StepResult r = env.step({});
        CHECK(r.info.perturbed_ids.empty());
    }
    CHECK(env.find_object("cube_red")->pose.x == doctest::Approx(0.7));
    const StepResult r = env.step({});
    REQUIRE(r.info.perturbed_ids.size() == 1);
    CHECK(r.info.perturbed_ids[0] == "cube_red");
    CHECK(env.find_object("cube_red")->pose.x == doctest::Approx(0.2));
}

TEST_CASE("perturbing a held object rips it from the gripper") {
    ScenarioSpec s = reach_scenario({0.5, 0.5, 0.1}, {0.9, 0.5, 0.1});
    s.objects.push_back(cube("c", Color::red, {0.52, 0.5, 0.1}));
    s.perturbations.push_back({1, "c", {0.2, 0.2, 0.02}});
    Env env(s, 0);
    env.step({{0, 0, 0}, GripCmd::close});
    CHECK(env.robot().held == "c");
    env.step({});
    CHECK_FALSE(env.robot().held.has_value());
    CHECK(env.robot().gripper_closed);  // gripper did not open, the object left
    CHECK(env.find_object("c")->pose.x == doctest::Approx(0.2));
}

// ============================================================================
// episode bound / determinism / containment
// ============================================================================

TEST_CASE("episode ends at max_steps and further steps throw") {
    ScenarioSpec s = reach_scenario({0.1, 0.1, 0.1}, {0.9, 0.9, 0.4});
    s.max_steps = 3;
    Env env(s, 0);
    env.step({});
    env.step({});
    const StepResult r = env.step({});
    CHECK(r.done);
    CHECK_FALSE(r.info.goal);
    CHECK_THROWS_AS(env.step({}), EpisodeFinished);
}

TEST_CASE("identical seeds and actions give bit-identical traces") {
    auto run = [](Env& env) {
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> d(-0.05, 0.05);
        std::ostringstream trace;
        for (int i = 0; i < 60 && !env.done(); ++i) {
            Action a;
            a.delta = {d(rng), d(rng), d(rng)};
            a.grip = i % 11 == 3 ? GripCmd::close : i % 11 == 7 ? GripCmd::open : GripCmd::hold;
            trace << env_trace_line(i, a, env.step(a)) << "\n";
        }
        return trace.str();
    };
    Env a(pick_place(), 123);
    Env b(pick_place(), 123);
    const std::string ta = run(a);
    CHECK(ta == run(b));
    // and again after reset on the same instance
    a.reset();
    CHECK(ta == run(a));
}

TEST_CASE("poses stay inside the workspace under random actions") {
    ScenarioSpec s = load_scenario("scenarios/obstacle_course.json");
    Env env(s, 9);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-0.08, 0.08);
    std::uniform_int_distribution<int> g(0, 2);
    for (int i = 0; i < 200 && !env.done(); ++i) {
        Action a;
        a.delta = {d(rng), d(rng), d(rng)};
        a.grip = static_cast<GripCmd>(g(rng));
        env.step(a);
        CHECK(env.scenario().bounds.contains(env.robot().ee));
        for (const auto& o : env.objects()) CHECK(env.scenario().bounds.contains(o.pose));
    }
}

// ============================================================================
// world summary
// ============================================================================

TEST_CASE("world summary lists objects in spec order and tracks held state") {
    Env env(pick_place(), 0);
    WorldSummary s = env.world_summary();
    REQUIRE(s.objects.size() == 2);
    CHECK(s.objects[0].id == "cube_red");
    CHECK(s.objects[1].id == "platform_blue");
    CHECK_FALSE(s.objects[0].held);
    CHECK(s.home == env.scenario().ee_start);

    // drive to the cube and grasp it
    while (distance(env.robot().ee, env.find_object("cube_red")->pose) > 0.02) {
        const Vec3 to = env.find_object("cube_red")->pose - env.robot().ee;
        env.step({clamp_components(to, -0.05, 0.05), GripCmd::hold});
    }
    env.step({{0, 0, 0}, GripCmd::close});
    WorldSummary held = env.world_summary();
    CHECK(held.robot.held == "cube_red");
    CHECK(held.objects[0].held);
}

TEST_CASE("world summary serialization round-trips") {
    Env env(pick_place(), 0);
    const WorldSummary s = env.world_summary();
    const std::string text = s.to_json_text();
    const WorldSummary back = WorldSummary::from_json_text(text);
    CHECK(back.to_json_text() == text);
    CHECK(back.objects.size() == s.objects.size());
    CHECK(back.robot.ee == s.robot.ee);
}

TEST_CASE("scenario file round-trips through save and load") {
    const ScenarioSpec s = pick_place();
    const std::string text = scenario_to_json_text(s);
    const ScenarioSpec back = scenario_from_json_text(text);
    CHECK(scenario_to_json_text(back) == text);
}
