/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

// Runs the command-line tool end to end.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string tool = CURVECAST_CLI;

fs::path work_dir() {
  const fs::path d = fs::path(CURVECAST_TEST_TMP);
  fs::create_directories(d);
  return d;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

int run(const std::string& args, const std::string& stdout_file = "") {
  const std::string out = stdout_file.empty() ? path("last_stdout.txt") : stdout_file;
  const std::string cmd = "\"" + tool + "\" " + args + " > \"" + out + "\" 2> \"" + path("last_stderr.txt") + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ASSERT_EQ(run("synth --preset callcenter --curves 80 --seed 5 -o " + path("panel.csv")), 0)
        << slurp(path("last_stderr.txt"));
  }
};

TEST_F(Cli, NoArgumentsIsAUsageError) { EXPECT_EQ(run(""), 1); }

TEST_F(Cli, HelpSucceeds) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(slurp(path("last_stdout.txt")).find("evaluate"), std::string::npos);
}

TEST_F(Cli, UnknownOptionIsAUsageError) { EXPECT_EQ(run("fit --data " + path("panel.csv") + " --bogus 3"), 1); }

TEST_F(Cli, MissingFileIsADataError) { EXPECT_EQ(run("fit --data " + path("does_not_exist.csv")), 2); }

TEST_F(Cli, SchemaErrorIsADataError) {
  std::ofstream(path("bad.csv")) << "when,10:00,10:15\n2003-01-06,1,2\n";
  EXPECT_EQ(run("fit --data " + path("bad.csv")), 2);
}

TEST_F(Cli, SynthIsSeeded) {
  ASSERT_EQ(run("synth --preset callcenter --curves 80 --seed 5 -o " + path("panel2.csv")), 0);
  EXPECT_EQ(slurp(path("panel.csv")), slurp(path("panel2.csv")));
  const std::string text = slurp(path("panel.csv"));
  EXPECT_EQ(text.rfind("date,07:05,07:10,", 0), 0u);
  EXPECT_EQ(lines(text), 81u);
}

TEST_F(Cli, FitForecastAndBands) {
  ASSERT_EQ(run("fit --data " + path("panel.csv") + " -p 2 -q 1 --weekday Tue -o " + path("model.txt")), 0)
      << slurp(path("last_stderr.txt"));
  const std::string model = slurp(path("model.txt"));
  EXPECT_EQ(model.rfind("curvecast-model 1\n", 0), 0u);
  EXPECT_NE(model.find("dims "), std::string::npos);

  // today: the last panel day with everything after 10:00 blanked
  std::istringstream panel(slurp(path("panel.csv")));
  std::string header, row, last;
  std::getline(panel, header);
  while (std::getline(panel, row))
    if (!row.empty()) last = row;
  std::string partial;
  {
    std::istringstream cells(last);
    std::istringstream labels(header);
    std::string cell, label;
    bool first = true;
    while (std::getline(cells, cell, ',') && std::getline(labels, label, ',')) {
      const bool keep = first || label <= "10:00";
      partial += (first ? "" : ",") + (keep ? cell : std::string());
      first = false;
    }
  }
  std::ofstream(path("today.csv")) << header << "\n" << partial << "\n";

  ASSERT_EQ(run("forecast --model " + path("model.txt") + " --today " + path("today.csv") +
                    " --cut 10:00 --method ridge --band global --sims 2000 -o " + path("fc.csv")),
            0)
      << slurp(path("last_stderr.txt"));
  const std::string fc = slurp(path("fc.csv"));
  EXPECT_EQ(fc.rfind("time,forecast,sd,lower,upper\n", 0), 0u);
  EXPECT_GT(lines(fc), 100u);

  ASSERT_EQ(run("bands --model " + path("model.txt") + " --cut 12:00 --sims 2000 --seed 3 -o " + path("b1.csv")), 0)
      << slurp(path("last_stderr.txt"));
  ASSERT_EQ(run("bands --model " + path("model.txt") + " --cut 12:00 --sims 2000 --seed 3 -o " + path("b2.csv")), 0);
  const std::string b = slurp(path("b1.csv"));
  EXPECT_EQ(b, slurp(path("b2.csv")));
  EXPECT_NE(b.find("# z_global"), std::string::npos);
  EXPECT_NE(b.find("# inequality_bound"), std::string::npos);

  EXPECT_EQ(run("bands --model " + path("model.txt") + " --cut 25:00"), 1);
  EXPECT_EQ(run("forecast --model " + path("model.txt") + " --today " + path("today.csv") + " --band cv_local"), 1);
}

TEST_F(Cli, EvaluateWithConfigFile) {
  std::ofstream(path("eval.ini")) << "[evaluate]\nwindow=40\nknot-spacing=120\nfolds=5\nsims=500\n"
                                  << "methods=[\"mean\", \"ridge\"]\ncuts=[\"10:00\"]\nformat=\"csv\"\n";
  ASSERT_EQ(run("--config " + path("eval.ini") + " evaluate --data " + path("panel.csv") + " -p 2 -q 1 -o " +
                path("eval.csv")),
            0)
      << slurp(path("last_stderr.txt"));
  const std::string csv = slurp(path("eval.csv"));
  EXPECT_EQ(csv.rfind("run,date,weekday,p,q,rmse,ape,cover,width\n", 0), 0u);
  EXPECT_EQ(lines(csv), 1u + 2u * 40u);
  EXPECT_NE(csv.find("mean@10:00"), std::string::npos);
  EXPECT_NE(csv.find("ridge@10:00"), std::string::npos);

  // a flag on the command line overrides the file
  ASSERT_EQ(run("--config " + path("eval.ini") + " evaluate --data " + path("panel.csv") +
                " -p 2 -q 1 --format table -o " + path("eval.txt")),
            0);
  EXPECT_NE(slurp(path("eval.txt")).find("RMSE"), std::string::npos);
}
