#include "tfdm/opcount.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace tfdm {

namespace {

std::int64_t dft_budget(int c_fft, int h, int w, int c) {
  if (static_cast<std::int64_t>(h) * w <= 1) return 0;
  return llround(static_cast<double>(c_fft) * h * w * c *
                 std::log2(static_cast<double>(h) * w));
}

}  // namespace

OpCountReport count_ops(const NetworkConfig& cfg, int c_fft) {
  std::vector<ShapeStep> steps = validate_config(cfg);
  OpCountReport rep;
  rep.network = cfg.name;
  rep.c_fft = c_fft;

  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& l = cfg.layers[i];
    const ShapeStep& in = steps[i];
    const ShapeStep& out = steps[i + 1];
    const std::string nm = "l" + std::to_string(i) + "." + l.kind;
    const char* dom = in.freq ? "freq" : "time";

    if (l.kind == "conv") {
      OpRow r{nm, l.kind, dom};
      const std::int64_t taps = static_cast<std::int64_t>(l.k) * l.k * in.c;
      const std::int64_t outs = static_cast<std::int64_t>(out.h) * out.w * out.c;
      r.mults = taps * outs;
      r.adds = taps * outs;  // taps-1 reduction adds + 1 bias add per output
      r.params = taps * out.c + out.c;
      rep.rows.push_back(r);
    } else if (l.kind == "eml") {
      OpRow r{nm, l.kind, dom};
      const std::int64_t bins = static_cast<std::int64_t>(in.h) * in.w;
      r.mults = 4 * bins * in.c * out.c;
      r.adds = static_cast<std::int64_t>(out.c) * (in.c - 1) * 2 * bins;
      r.params = 2 * bins * in.c * out.c;
      rep.rows.push_back(r);
      rep.fixation_dft_per_step +=
          2 * static_cast<std::int64_t>(in.c) * out.c * dft_budget(c_fft, in.h, in.w, 1);
    } else if (l.kind == "head") {
      auto dense_row = [&](const std::string& tag, std::int64_t din, std::int64_t dout) {
        OpRow r{nm + "/" + tag, "dense", dom};
        r.mults = din * dout;
        r.adds = din * dout;
        r.params = din * dout + dout;
        rep.rows.push_back(r);
      };
      const std::int64_t flat = static_cast<std::int64_t>(in.h) * in.w * in.c;
      if (in.freq) {
        std::int64_t cur = flat;
        for (size_t j = 0; j < l.hidden.size(); ++j) {
          dense_row("re" + std::to_string(j), cur, l.hidden[j]);
          dense_row("im" + std::to_string(j), cur, l.hidden[j]);
          cur = l.hidden[j];
        }
        dense_row("logits", 2 * cur, cfg.classes);
      } else {
        std::int64_t cur = flat;
        for (size_t j = 0; j < l.hidden.size(); ++j) {
          dense_row("h" + std::to_string(j), cur, l.hidden[j]);
          cur = l.hidden[j];
        }
        dense_row("logits", cur, cfg.classes);
      }
    } else if (l.kind == "bridge_to_freq" || l.kind == "bridge_to_time") {
      OpRow r{nm, l.kind, dom};
      r.dft_ops = dft_budget(c_fft, in.h, in.w, in.c);
      rep.rows.push_back(r);
    } else if (l.kind == "max_pool" && in.freq) {
      OpRow r{nm, "max_pool", dom};
      r.dft_ops = dft_budget(c_fft, in.h, in.w, in.c) + dft_budget(c_fft, out.h, out.w, out.c);
      rep.rows.push_back(r);
    } else if (l.kind == "batch_norm") {
      OpRow r{nm, l.kind, dom};
      r.params = (in.freq ? 4 : 2) * static_cast<std::int64_t>(in.c);
      rep.rows.push_back(r);
    } else {
      rep.rows.push_back(OpRow{nm, l.kind, dom});
    }
  }

  for (const OpRow& r : rep.rows) {
    rep.mult_total += r.mults;
    rep.add_total += r.adds;
    rep.dft_total += r.dft_ops;
    rep.param_total += r.params;
    if (r.domain == "freq")
      rep.freq_mults += r.mults;
    else
      rep.time_mults += r.mults;
  }
  return rep;
}

std::string OpCountReport::to_text() const {
  std::ostringstream os;
  os << "network: " << network << "\n";
  os << "per-sample forward cost; mults counts conv/eml/dense real multiplications\n";
  os << "(4 per complex product); transforms budgeted separately in dft_ops at\n";
  os << "c_fft=" << c_fft << " * h*w*c*log2(h*w); norm/activation/pool scaling excluded\n\n";
  os << std::left << std::setw(22) << "layer" << std::setw(16) << "kind" << std::setw(6)
     << "dom" << std::right << std::setw(14) << "mults" << std::setw(14) << "adds"
     << std::setw(14) << "dft_ops" << std::setw(12) << "params" << "\n";
  for (const OpRow& r : rows)
    os << std::left << std::setw(22) << r.layer << std::setw(16) << r.kind << std::setw(6)
       << r.domain << std::right << std::setw(14) << r.mults << std::setw(14) << r.adds
       << std::setw(14) << r.dft_ops << std::setw(12) << r.params << "\n";
  os << std::left << std::setw(22) << "TOTAL" << std::setw(16) << "" << std::setw(6) << ""
     << std::right << std::setw(14) << mult_total << std::setw(14) << add_total
     << std::setw(14) << dft_total << std::setw(12) << param_total << "\n";
  os << "\ntime-domain mults: " << time_mults << "\n";
  os << "freq-domain mults: " << freq_mults << "\n";
  os << "weight fixation dft_ops per training step: " << fixation_dft_per_step << "\n";
  return os.str();
}

std::string OpCountReport::to_csv() const {
  std::ostringstream os;
  os << "layer,kind,domain,mult_ops,add_ops,dft_ops,params\n";
  for (const OpRow& r : rows)
    os << r.layer << "," << r.kind << "," << r.domain << "," << r.mults << "," << r.adds << ","
       << r.dft_ops << "," << r.params << "\n";
  os << "TOTAL,,," << mult_total << "," << add_total << "," << dft_total << "," << param_total
     << "\n";
  return os.str();
}

std::string compare_text(const OpCountReport& a, const OpCountReport& b) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "network" << std::right << std::setw(14) << "mults"
     << std::setw(14) << "adds" << std::setw(14) << "dft_ops" << std::setw(12) << "params"
     << "\n";
  for (const OpCountReport* r : {&a, &b})
    os << std::left << std::setw(24) << r->network << std::right << std::setw(14)
       << r->mult_total << std::setw(14) << r->add_total << std::setw(14) << r->dft_total
       << std::setw(12) << r->param_total << "\n";
  os << "\nmult ratio " << a.network << " / " << b.network << " = " << std::fixed
     << std::setprecision(4)
     << (b.mult_total > 0 ? static_cast<double>(a.mult_total) / b.mult_total : 0.0) << "\n";
  return os.str();
}

std::string compare_csv(const OpCountReport& a, const OpCountReport& b) {
  std::ostringstream os;
  os << "network,mult_ops,add_ops,dft_ops,params\n";
  for (const OpCountReport* r : {&a, &b})
    os << r->network << "," << r->mult_total << "," << r->add_total << "," << r->dft_total
       << "," << r->param_total << "\n";
  return os.str();
}

}  // namespace tfdm
