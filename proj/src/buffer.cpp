#include "replab/buffer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "replab/common.hpp"
#include "replab/rng.hpp"

namespace replab {
namespace {

using nlohmann::json;

void validate_obs(const PixelObservation& o, const char* which) {
  if (o.h <= 0 || o.w <= 0 || o.stack <= 0)
    throw ValidationError(std::string(which) + " observation has empty shape");
  if (static_cast<int>(o.frames.size()) != o.stack)
    throw ValidationError(std::string(which) +
                          " observation frame count != stack");
  for (const auto& f : o.frames) {
    if (!f) throw ValidationError(std::string(which) + " frame is null");
    if (f->h != o.h || f->w != o.w || f->c != 3)
      throw ValidationError(std::string(which) +
                            " frame does not match declared shape");
  }
}

json obs_to_json(const PixelObservation& o,
                 std::unordered_map<const Image8*, size_t>& ids,
                 std::vector<const Image8*>& uniq) {
  json j;
  j["h"] = o.h;
  j["w"] = o.w;
  j["stack"] = o.stack;
  j["layout"] = to_string(o.layout);
  j["f"] = json::array();
  for (const auto& f : o.frames) {
    auto it = ids.find(f.get());
    if (it == ids.end()) {
      it = ids.emplace(f.get(), uniq.size()).first;
      uniq.push_back(f.get());
    }
    j["f"].push_back(it->second);
  }
  return j;
}

PixelObservation obs_from_json(
    const json& j, const std::vector<std::shared_ptr<const Image8>>& frames) {
  PixelObservation o;
  o.h = j.at("h");
  o.w = j.at("w");
  o.stack = j.at("stack");
  o.layout = layout_from_string(j.at("layout").get<std::string>());
  for (const auto& id : j.at("f")) {
    size_t i = id.get<size_t>();
    if (i >= frames.size()) throw ValidationError("spill frame id out of range");
    o.frames.push_back(frames[i]);
  }
  return o;
}

}  // namespace

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
}

const TransitionRecord& ReplayBuffer::at(size_t i) const {
  if (i >= data_.size()) throw UsageError("replay index out of range");
  return data_[i];
}

void ReplayBuffer::push(TransitionRecord rec) {
  validate_obs(rec.obs, "current");
  validate_obs(rec.next_obs, "next");
  if (rec.obs.h != rec.next_obs.h || rec.obs.w != rec.next_obs.w ||
      rec.obs.stack != rec.next_obs.stack)
    throw ValidationError("observation pair has mismatched shapes");
  if (!rec.obs_masks.empty()) {
    if (static_cast<int>(rec.obs_masks.size()) != rec.obs.stack)
      throw ValidationError("mask count != observation stack");
    for (const auto& m : rec.obs_masks) {
      if (!m) throw ValidationError("mask frame is null");
      if (m->h != rec.obs.h || m->w != rec.obs.w || m->c != 1)
        throw ValidationError("mask frame does not match observation shape");
    }
  }
  if (!std::isfinite(rec.reward))
    throw ValidationError("non-finite reward pushed to replay");
  for (int i = 0; i < rec.action.size(); ++i)
    if (!std::isfinite(rec.action[i]))
      throw ValidationError("non-finite action pushed to replay");
  if (data_.size() == capacity_) data_.pop_front();
  data_.push_back(std::move(rec));
  ++total_pushed_;
}

TransitionBatch ReplayBuffer::sample(size_t batch, uint64_t seed) const {
  if (batch == 0) throw ValidationError("batch size must be >= 1");
  if (data_.empty()) throw UsageError("sample from an empty replay buffer");
  Rng rng(seed);
  TransitionBatch out;
  out.items.reserve(batch);
  for (size_t b = 0; b < batch; ++b)
    out.items.push_back(&data_[rng.uniform_int(data_.size())]);
  return out;
}

SequenceBatch ReplayBuffer::sample_sequences(size_t batch, int horizon,
                                             uint64_t seed) const {
  if (batch == 0) throw ValidationError("batch size must be >= 1");
  if (horizon < 1) throw ValidationError("sequence horizon must be >= 1");
  std::vector<size_t> eligible;
  for (size_t j = 0; j + horizon <= data_.size(); ++j) {
    bool ok = true;
    for (int k = 0; k < horizon && ok; ++k) {
      const TransitionRecord& r = data_[j + k];
      if (r.episode_id != data_[j].episode_id) ok = false;
      if (k + 1 < horizon && r.done) ok = false;
    }
    if (ok) eligible.push_back(j);
  }
  if (eligible.empty())
    throw UsageError("replay holds no in-episode window of length " +
                     std::to_string(horizon));
  Rng rng(seed);
  SequenceBatch out;
  out.horizon = horizon;
  out.windows.reserve(batch);
  for (size_t b = 0; b < batch; ++b) {
    size_t j = eligible[rng.uniform_int(eligible.size())];
    std::vector<const TransitionRecord*> win;
    win.reserve(horizon);
    for (int k = 0; k < horizon; ++k) win.push_back(&data_[j + k]);
    out.windows.push_back(std::move(win));
  }
  return out;
}

void ReplayBuffer::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::unordered_map<const Image8*, size_t> ids;
  std::vector<const Image8*> uniq;
  json j;
  j["capacity"] = capacity_;
  j["total_pushed"] = total_pushed_;
  j["records"] = json::array();
  for (const auto& r : data_) {
    json jr;
    jr["obs"] = obs_to_json(r.obs, ids, uniq);
    jr["next"] = obs_to_json(r.next_obs, ids, uniq);
    if (!r.obs_masks.empty()) {
      jr["m"] = json::array();
      for (const auto& m : r.obs_masks) {
        auto it = ids.find(m.get());
        if (it == ids.end()) {
          it = ids.emplace(m.get(), uniq.size()).first;
          uniq.push_back(m.get());
        }
        jr["m"].push_back(it->second);
      }
    }
    jr["a"] = json::array();
    for (int i = 0; i < r.action.size(); ++i) jr["a"].push_back(r.action[i]);
    jr["r"] = r.reward;
    jr["d"] = r.done;
    jr["ep"] = r.episode_id;
    j["records"].push_back(std::move(jr));
  }
  json table = json::array();
  std::string blob;
  for (const Image8* f : uniq) {
    table.push_back({{"off", blob.size()}, {"w", f->w}, {"h", f->h}, {"c", f->c}});
    blob.append(reinterpret_cast<const char*>(f->px.data()), f->px.size());
  }
  j["frame_table"] = std::move(table);
  write_text_file(dir + "/records.json", j.dump());
  write_binary_file(dir + "/frames.bin", blob.data(), blob.size());
}

void ReplayBuffer::load(const std::string& dir) {
  json j = json::parse(read_text_file(dir + "/records.json"));
  std::vector<uint8_t> blob = read_binary_file(dir + "/frames.bin");
  std::vector<std::shared_ptr<const Image8>> frames;
  for (const auto& jt : j.at("frame_table")) {
    size_t off = jt.at("off");
    int w = jt.at("w"), h = jt.at("h"), c = jt.at("c");
    size_t n = static_cast<size_t>(w) * h * c;
    if (off + n > blob.size())
      throw ValidationError("frame table points past end of frames.bin");
    auto img = std::make_shared<Image8>(w, h, c);
    std::copy(blob.begin() + off, blob.begin() + off + n, img->px.begin());
    frames.push_back(std::move(img));
  }
  size_t cap = j.at("capacity");
  if (cap != capacity_)
    throw ValidationError("spill capacity " + std::to_string(cap) +
                          " does not match configured " +
                          std::to_string(capacity_));
  if (j.at("records").size() > capacity_)
    throw ValidationError("spill holds more records than capacity");
  data_.clear();
  for (const auto& jr : j.at("records")) {
    TransitionRecord r;
    r.obs = obs_from_json(jr.at("obs"), frames);
    r.next_obs = obs_from_json(jr.at("next"), frames);
    if (jr.contains("m")) {
      for (const auto& id : jr.at("m")) {
        size_t i = id.get<size_t>();
        if (i >= frames.size())
          throw ValidationError("spill mask id out of range");
        r.obs_masks.push_back(frames[i]);
      }
    }
    const auto& ja = jr.at("a");
    r.action.resize(ja.size());
    for (size_t i = 0; i < ja.size(); ++i) r.action[i] = ja[i].get<double>();
    r.reward = jr.at("r");
    r.done = jr.at("d");
    r.episode_id = jr.at("ep");
    data_.push_back(std::move(r));
  }
  total_pushed_ = j.at("total_pushed");
}

}  // namespace replab
