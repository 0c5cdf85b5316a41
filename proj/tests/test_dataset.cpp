#include "doctest.h"

#include "hra/dataset.hpp"
#include "hra/error.hpp"

#include <map>
#include <sstream>

using namespace hra;

namespace {

const char* kHeader =
    "id,available_time,stress,complexity,experience_training,procedures,ergonomics,fitness_for_duty,work_process,hep\n";

std::string save(const ObservationSet& s) {
    std::ostringstream out;
    save_observations(s, out);
    return out.str();
}

}  // namespace

TEST_CASE("bundled case-study table as printed") {
    const auto t = bundled_table2();
    REQUIRE(t.size() == 15);
    const auto& ins1 = t.instances()[0];
    CHECK(ins1.id == "Ins 1");
    CHECK(ins1.psfs == PsfVector({0.1, 2, 5, 3, 20, 0.5, 5, 0.5}));
    CHECK(ins1.hep.value() == 0.155);
    CHECK(t.instances()[4].hep.value() == 0.2);
    CHECK(t.instances()[6].hep.value() == 0.03);
}

TEST_CASE("training targets come from the fitted-network table") {
    const auto printed = bundled_table2();
    const auto cs = bundled_case_study();
    const auto ref = bundled_reference_fit();
    REQUIRE(cs.size() == 15);
    REQUIRE(ref.ids.size() == 15);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        CHECK(cs.instances()[i].psfs == printed.instances()[i].psfs);
        CHECK(cs.instances()[i].id == ref.ids[i]);
        CHECK(cs.instances()[i].hep.value() == ref.observed[i]);
    }
    CHECK(cs.instances()[4].hep.value() == 0.223);
}

TEST_CASE("observation CSV parsing") {
    std::istringstream header_only(kHeader);
    CHECK(load_observations(header_only).empty());

    std::istringstream bad_hep(std::string(kHeader) + "x,1,1,1,1,1,1,1,1,0.1\ny,1,1,1,1,1,1,1,1,1.5\n");
    try {
        load_observations(bad_hep);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    std::istringstream dup(std::string(kHeader) + "x,1,1,1,1,1,1,1,1,0.1\nx,1,1,1,1,1,1,1,1,0.2\n");
    CHECK_THROWS_AS(load_observations(dup), InputError);
    std::istringstream short_row(std::string(kHeader) + "x,1,1,1,1,1,1,1,0.1\n");
    CHECK_THROWS_AS(load_observations(short_row), InputError);
    std::istringstream wrong_header("id,a,b\n");
    CHECK_THROWS_AS(load_observations(wrong_header), InputError);
    std::istringstream zero_psf(std::string(kHeader) + "x,0,1,1,1,1,1,1,1,0.1\n");
    CHECK_THROWS_AS(load_observations(zero_psf), InputError);
    std::istringstream crlf(std::string("id,available_time,stress,complexity,experience_training,procedures,"
                                        "ergonomics,fitness_for_duty,work_process,hep\r\n") +
                            "x,1,1,1,1,1,1,1,1,0.1\r\n");
    CHECK(load_observations(crlf).size() == 1);
}

TEST_CASE("observation CSV round-trip") {
    const auto t = bundled_table2();
    std::istringstream in(save(t));
    CHECK(load_observations(in) == t);

    CHECK(save(ObservationSet{}) == kHeader);

    const ObservationSet one({Instance{"only", PsfVector::nominal(), Probability(0.25), std::nullopt}});
    const auto text = save(one);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    std::istringstream in1(text);
    CHECK(load_observations(in1) == one);

    const ObservationSet with_trials({Instance{"t", PsfVector::nominal(), Probability(0.1), 40u}});
    std::istringstream in2(save(with_trials));
    CHECK(load_observations(in2) == with_trials);
}

TEST_CASE("bundled design") {
    const auto d = bundled_table4();
    CHECK(d.size() == 60);
    CHECK(d.factors().size() == 8);
    CHECK(d.fully_evaluated());
    std::map<std::vector<double>, int> counts;
    for (const auto& r : d.rows()) ++counts[r.levels];
    int replicated = 0;
    for (const auto& [levels, c] : counts) {
        if (c > 1) {
            ++replicated;
            CHECK(c == 6);
        }
    }
    CHECK(replicated == 1);
    const auto& first = d.rows().front();
    CHECK(first.run_order == 1);
    CHECK(first.std_order == 22);
    CHECK(*first.response == 83.47);
}

TEST_CASE("design CSV round-trip and partial designs") {
    const auto d = bundled_table4();
    std::ostringstream out;
    save_design(d, out);
    std::istringstream in(out.str());
    CHECK(load_design(in) == d);

    std::istringstream partial("std,run,A,C,reliability\n1,1,0.2,0.8,\n2,2,0.8,0.2,91.5\n");
    const auto p = load_design(partial);
    CHECK(p.factors() == std::vector<PsfId>{PsfId::AvailableTime, PsfId::Complexity});
    CHECK_FALSE(p.fully_evaluated());
    CHECK_FALSE(p.rows()[0].response.has_value());
    CHECK_THROWS_AS(p.responses(), InputError);
    const auto filled = p.with_responses({80.0, 90.0});
    CHECK(filled.responses() == std::vector<double>{80.0, 90.0});

    std::istringstream unordered("std,run,C,A,reliability\n1,1,0.2,0.8,1\n");
    CHECK_THROWS_AS(load_design(unordered), InputError);
    std::istringstream bad("std,run,A,reliability\n1,1,x,1\n");
    CHECK_THROWS_AS(load_design(bad), InputError);
}
