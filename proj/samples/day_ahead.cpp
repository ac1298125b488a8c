// Day-ahead forecast for one synthetic industrial consumer: single GBDT,
// holiday/working-day fusion and the previous-day persistence, scored on
// the last 15% of the data.
//
//   sample_day_ahead [weeks] [seed]

#include "loadfc/evaluation.hpp"
#include "loadfc/strategies.hpp"
#include "loadfc/synth.hpp"

#include <cstdio>
#include <string>

using namespace loadfc;

int main(int argc, char** argv) {
    auto cfg = SynthConfig::defaults(ConsumerType::Industrial);
    cfg.cadence = Cadence::Hour;
    cfg.weeks = argc > 1 ? std::stoul(argv[1]) : 26;
    cfg.seed = argc > 2 ? std::stoull(argv[2]) : 1;

    const auto cal = spanish_holidays(2021, 2022);
    const auto weather = synth_weather(cfg.zone_id, cfg.start, cfg.weeks * 7 * 24 + 24, cfg.seed);
    const auto rec = generate(cfg, cal, weather);
    const auto table = align_covariates(rec.load, weather, cal, std::nullopt);
    const std::size_t fit = table.size() * 85 / 100;
    const auto spec = default_feature_spec(ConsumerType::Industrial, Task::DayAhead);

    auto score = [&](const char* name, const std::vector<double>& pred) {
        const std::vector<Timestamp> ts(table.timestamps.begin() + static_cast<long>(fit), table.timestamps.end());
        const std::vector<double> a(table.target.begin() + static_cast<long>(fit), table.target.end());
        const std::vector<double> p(pred.begin() + static_cast<long>(fit), pred.end());
        const auto rep = rolling_day_ahead(rec.consumer_id, ts, a, p, ThresholdPolicy{});
        std::printf("%-10s MAPE %6.2f%%  MAE %7.2f kW  score %5.1f%%  (%zu windows)\n", name, rep.aggregate_mape,
                    rep.aggregate_mae, rep.score_mape, rep.windows.size());
    };

    TrainOptions o;
    const auto single = train_strategy(table, fit, spec, Task::DayAhead, cal, o);
    score("single", predict_strategy(single, table, cal));

    o.strategy = Strategy::Fusion;
    o.holiday_definition = HolidayDefinition::PublicHolidaysAndWeekends;
    const auto fusion = train_strategy(table, fit, spec, Task::DayAhead, cal, o);
    score("fusion", predict_strategy(fusion, table, cal));

    score("persist", baseline_column({BaselineKind::PersistPreviousDay}, table));
}
