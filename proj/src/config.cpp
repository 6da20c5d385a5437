#include "omni/config.hpp"

#include <fstream>
#include <sstream>

#include "omni/errors.hpp"

namespace omni {

namespace {

int64_t parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  return v;
}

}  // namespace

const std::vector<std::string>& RunConfig::valid_keys() {
  static const std::vector<std::string> keys = {
      "data_dir",     "out_dir",      "seed",        "steps",         "lr",
      "batch_size",   "max_new",      "bench_reps",  "mode",          "d_llm",
      "llm_blocks",   "llm_heads",    "context",     "d_vis",         "vision_blocks",
      "speech_hidden", "speech_blocks", "gen_hidden", "codec_channels", "codec_latent",
      "n_asr_train",  "n_asr_dev",    "n_tts",       "n_caption",     "n_qa",
      "n_video"};
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "data_dir") data_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "seed") seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "steps") steps = parse_int(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "batch_size") batch_size = parse_int(key, value);
  else if (key == "max_new") max_new = parse_int(key, value);
  else if (key == "bench_reps") bench_reps = parse_int(key, value);
  else if (key == "mode") {
    if (value != "sequential" && value != "pipelined")
      throw ConfigError("config: mode must be 'sequential' or 'pipelined', got '" + value + "'");
    mode = value;
  } else if (key == "d_llm") d_llm = parse_int(key, value);
  else if (key == "llm_blocks") llm_blocks = parse_int(key, value);
  else if (key == "llm_heads") llm_heads = parse_int(key, value);
  else if (key == "context") context = parse_int(key, value);
  else if (key == "d_vis") d_vis = parse_int(key, value);
  else if (key == "vision_blocks") vision_blocks = parse_int(key, value);
  else if (key == "speech_hidden") speech_hidden = parse_int(key, value);
  else if (key == "speech_blocks") speech_blocks = parse_int(key, value);
  else if (key == "gen_hidden") gen_hidden = parse_int(key, value);
  else if (key == "codec_channels") codec_channels = parse_int(key, value);
  else if (key == "codec_latent") codec_latent = parse_int(key, value);
  else if (key == "n_asr_train") n_asr_train = parse_int(key, value);
  else if (key == "n_asr_dev") n_asr_dev = parse_int(key, value);
  else if (key == "n_tts") n_tts = parse_int(key, value);
  else if (key == "n_caption") n_caption = parse_int(key, value);
  else if (key == "n_qa") n_qa = parse_int(key, value);
  else if (key == "n_video") n_video = parse_int(key, value);
  else {
    std::string valid;
    for (const std::string& k : valid_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("config: unknown key '" + key + "'; valid keys: " + valid);
  }
}

void RunConfig::apply_override(const std::string& kv) {
  const size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must be key=value, got '" + kv + "'");
  set(kv.substr(0, eq), kv.substr(eq + 1));
}

std::string RunConfig::to_json() const {
  std::ostringstream os;
  os << "{\"data_dir\":\"" << data_dir << "\",\"out_dir\":\"" << out_dir << "\",\"seed\":" << seed
     << ",\"steps\":" << steps << ",\"lr\":" << lr << ",\"batch_size\":" << batch_size
     << ",\"max_new\":" << max_new << ",\"bench_reps\":" << bench_reps << ",\"mode\":\"" << mode
     << "\",\"d_llm\":" << d_llm << ",\"llm_blocks\":" << llm_blocks
     << ",\"llm_heads\":" << llm_heads << ",\"context\":" << context << ",\"d_vis\":" << d_vis
     << ",\"vision_blocks\":" << vision_blocks << ",\"speech_hidden\":" << speech_hidden
     << ",\"speech_blocks\":" << speech_blocks << ",\"gen_hidden\":" << gen_hidden
     << ",\"codec_channels\":" << codec_channels << ",\"codec_latent\":" << codec_latent
     << ",\"n_asr_train\":" << n_asr_train << ",\"n_asr_dev\":" << n_asr_dev
     << ",\"n_tts\":" << n_tts << ",\"n_caption\":" << n_caption << ",\"n_qa\":" << n_qa
     << ",\"n_video\":" << n_video << "}";
  return os.str();
}

OmniConfig RunConfig::model_config() const {
  OmniConfig c;
  c.llm.d_llm = d_llm;
  c.llm.n_blocks = llm_blocks;
  c.llm.n_heads = llm_heads;
  c.llm.context = context;
  c.vision.d_vis = d_vis;
  c.vision.n_blocks = vision_blocks;
  c.speech.hidden = speech_hidden;
  c.speech.n_blocks = speech_blocks;
  c.gen.hidden = gen_hidden;
  c.codec.channels = codec_channels;
  c.codec.d_latent = codec_latent;
  return c;
}

CorpusCounts RunConfig::corpus_counts() const {
  CorpusCounts c;
  c.asr_train = static_cast<int>(n_asr_train);
  c.asr_dev = static_cast<int>(n_asr_dev);
  c.tts = static_cast<int>(n_tts);
  c.caption = static_cast<int>(n_caption);
  c.qa = static_cast<int>(n_qa);
  c.video = static_cast<int>(n_video);
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const size_t end = line.find_last_not_of(" \t\r");
    const std::string trimmed = line.substr(begin, end - begin + 1);
    const size_t eq = trimmed.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("config: " + path + " line " + std::to_string(lineno) +
                        " is not key=value: '" + trimmed + "'");
    cfg.set(trimmed.substr(0, eq), trimmed.substr(eq + 1));
  }
  return cfg;
}

}  // namespace omni
