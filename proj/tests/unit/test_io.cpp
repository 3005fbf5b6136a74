#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rjpdmp/io.hpp"

using namespace rjpdmp;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rjpdmp_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(IoTest, DatasetRoundTripIsExact) {
  Rng rng(1);
  Dataset d{Matrix(7, 3), Vector(7)};
  for (Index i = 0; i < 7; ++i) {
    d.y[i] = rng.normal();
    for (Index j = 0; j < 3; ++j) d.X(i, j) = rng.normal() * 1e-7 + (j == 1 ? 1e12 : 0.0);
  }
  io::write_dataset_csv(path("d.csv"), d);
  const Dataset back = io::read_dataset_csv(path("d.csv"));
  EXPECT_EQ(back.X, d.X);
  EXPECT_EQ(back.y, d.y);
}

TEST_F(IoTest, DatasetHeaderAndBlankLines) {
  const auto p = write("d.csv", "y,x_0,x_1\r\n1,2,3\r\n\n0,-1,0.5\n");
  const Dataset d = io::read_dataset_csv(p);
  ASSERT_EQ(d.n(), 2);
  EXPECT_EQ(d.X(1, 1), 0.5);
  EXPECT_EQ(d.y[0], 1.0);
}

TEST_F(IoTest, MalformedDatasetsRejected) {
  EXPECT_THROW(io::read_dataset_csv(path("missing.csv")), io::IoError);
  EXPECT_THROW(io::read_dataset_csv(write("a.csv", "")), io::IoError);
  EXPECT_THROW(io::read_dataset_csv(write("b.csv", "y\n1\n")), io::IoError);
  EXPECT_THROW(io::read_dataset_csv(write("c.csv", "y,x_0\n1,2,3\n")), io::IoError);
  EXPECT_THROW(io::read_dataset_csv(write("d.csv", "y,x_0\n1,abc\n")), io::IoError);
  EXPECT_THROW(io::read_dataset_csv(write("e.csv", "y,x_0\n1,\n")), io::IoError);
}

TEST_F(IoTest, SkeletonRoundTrip) {
  Skeleton sk;
  sk.initial = SamplerState(2);
  sk.initial.theta << 0.1, 0.0;
  sk.initial.vel << 1.0, 0.0;
  sk.initial.gamma = Mask{true, false};
  SamplerState a = sk.initial;
  a.t = 0.4;
  a.theta << 0.5, 0.0;
  a.vel << -1.0, 0.0;
  sk.events.push_back({0.4, EventKind::Reflect, 0, a});
  SamplerState b = a;
  b.t = 0.9;
  b.theta << 0.0, 0.0;
  b.vel << 1.0, 1.0;
  b.gamma = Mask{true, true};
  sk.events.push_back({0.9, EventKind::Reintroduce, 1, b});
  sk.t_final = 1.5;
  io::write_skeleton_csv(path("s.csv"), sk);
  const Skeleton back = io::read_skeleton_csv(path("s.csv"));
  EXPECT_EQ(back.initial, sk.initial);
  ASSERT_EQ(back.events.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.events[i].t, sk.events[i].t);
    EXPECT_EQ(back.events[i].kind, sk.events[i].kind);
    EXPECT_EQ(back.events[i].coord, sk.events[i].coord);
    EXPECT_EQ(back.events[i].state_after, sk.events[i].state_after);
  }
  EXPECT_EQ(back.t_final, 1.5);
}

TEST_F(IoTest, SkeletonEndRowHoldsFinalPosition) {
  Skeleton sk;
  sk.initial = SamplerState(1);
  sk.initial.theta << 1.0;
  sk.initial.vel << 1.0;
  sk.initial.gamma = Mask{true};
  sk.t_final = 2.0;
  io::write_skeleton_csv(path("s.csv"), sk);
  std::ifstream f(path("s.csv"));
  std::string header, start, end;
  std::getline(f, header);
  std::getline(f, start);
  std::getline(f, end);
  EXPECT_EQ(header, "t,kind,coord,theta_0,vel_0,gamma_0");
  EXPECT_EQ(end, "2,end,-1,3,1,1");
}

TEST_F(IoTest, MalformedSkeletonsRejected) {
  const std::string h = "t,kind,coord,theta_0,vel_0,gamma_0\n";
  EXPECT_THROW(io::read_skeleton_csv(write("a.csv", "t,kind\n")), io::IoError);
  EXPECT_THROW(io::read_skeleton_csv(write("b.csv", h + "0,start,-1,0,1,1\n")), io::IoError);
  EXPECT_THROW(io::read_skeleton_csv(write("c.csv", h + "0,start,-1,0,1,1\n1,bounce,0,1,1,1\n2,end,-1,2,1,1\n")),
               io::IoError);
  EXPECT_THROW(io::read_skeleton_csv(write("d.csv", h + "0,start,-1,0,1\n")), io::IoError);
  EXPECT_NO_THROW(io::read_skeleton_csv(write("e.csv", h + "0,start,-1,0,1,1\n1,end,-1,1,1,1\n")));
}

TEST_F(IoTest, JsonHelpers) {
  Vector v(3);
  v << 1.5, -2.0, 1e-300;
  io::write_json(path("v.json"), {{"v", io::to_json(v)}});
  EXPECT_EQ(io::vector_from_json(io::read_json(path("v.json"))["v"]), v);
  EXPECT_THROW(io::read_json(write("bad.json", "{nope")), io::IoError);
}

TEST(IoFormat, ShortestExactDoubles) {
  EXPECT_EQ(io::fmt(0.1), "0.10000000000000001");
  EXPECT_EQ(io::fmt(2.0), "2");
  EXPECT_EQ(io::parse_double(io::fmt(M_PI), "x"), M_PI);
  EXPECT_THROW(io::parse_double("1.0x", "x"), io::IoError);
}
