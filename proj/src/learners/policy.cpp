#include "tbs/learners/policy.hpp"

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"

namespace tbs::learners {

Policy::Policy(ValueFunction values, PolicyProvenance provenance)
    : values_(std::make_shared<const ValueFunction>(std::move(values))),
      provenance_(std::move(provenance)) {}

Policy Policy::uniform(int action_count, const envs::ObservationSpec& spec) {
  return Policy(ValueFunction::tabular(action_count, spec.key_mask),
                PolicyProvenance{"uniform", 0, {}, ""});
}

int Policy::act(const envs::Observation& obs, Rng& rng) const {
  const Encoded e = values_->encode(obs);
  if (!values_->visited(e)) return uniform_int(rng, values_->action_count());
  return values_->greedy(e);
}

int Policy::greedy_action(const envs::Observation& obs) const {
  return values_->greedy(values_->encode(obs));
}

bool Policy::knows(const envs::Observation& obs) const {
  return values_->visited(values_->encode(obs));
}

nlohmann::json Policy::to_json() const {
  return {{"format", "tbs.policy"},
          {"version", kPolicyFormatVersion},
          {"values", values_->to_json()},
          {"provenance",
           {{"role", provenance_.role},
            {"seed", provenance_.seed},
            {"shaping_coefficients", provenance_.shaping_coefficients},
            {"config_hash", provenance_.config_hash}}}};
}

Policy Policy::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "tbs.policy") throw Error("not a policy artifact");
  if (j.value("version", 0) != kPolicyFormatVersion) {
    throw Error("unsupported policy format version " +
                std::to_string(j.value("version", 0)));
  }
  const auto& p = j.at("provenance");
  PolicyProvenance prov{p.value("role", ""), p.value("seed", std::uint64_t{0}),
                        p.value("shaping_coefficients", std::vector<double>{}),
                        p.value("config_hash", "")};
  return Policy(ValueFunction::from_json(j.at("values")), std::move(prov));
}

void Policy::save(const std::string& path) const {
  write_file_atomic(path, to_json().dump() + "\n");
}

Policy Policy::load(const std::string& path) { return from_json(read_json(path)); }

}  // namespace tbs::learners
