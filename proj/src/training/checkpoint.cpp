#include "smoothsinger/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/errors.hpp"

namespace smoothsinger::training {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'S', 'C', 'K', 'P', 'T', '0', '1'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_ += s;
  }
  void put_tensor_values(const Tensor& t) {
    out_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint64_t>(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Tensor get_tensor(const numerics::Shape& shape, const char* what) {
    Tensor t(shape);
    need(t.size() * sizeof(double), what);
    std::memcpy(t.data(), in_.data() + pos_, t.size() * sizeof(double));
    pos_ += t.size() * sizeof(double);
    return t;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n, const char* what) {
    if (n > in_.size() - pos_)
      throw ValidationError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint capture(const network::Model& model, const AdamW& optimizer, std::uint64_t step) {
  Checkpoint ck;
  ck.config = model.config();
  ck.step = step;
  ck.optimizer_updates = optimizer.updates();
  const auto params = model.parameters();
  const bool have_moments = optimizer.first_moments().size() == params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i]->value.shape();
    ck.tensors.push_back({params[i]->name, params[i]->value,
                          have_moments ? optimizer.first_moments()[i] : Tensor(shape),
                          have_moments ? optimizer.second_moments()[i] : Tensor(shape)});
  }
  return ck;
}

std::string encode(const Checkpoint& ck) {
  Writer w;
  w.bytes().append(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(network::to_text(ck.config));
  w.put<std::uint64_t>(ck.step);
  w.put<std::uint64_t>(ck.optimizer_updates);
  w.put<std::uint64_t>(ck.tensors.size());
  for (const auto& t : ck.tensors) {
    w.put_string(t.name);
    w.put<std::uint64_t>(t.value.rank());
    for (auto d : t.value.shape()) w.put<std::uint64_t>(d);
    w.put_tensor_values(t.value);
    w.put_tensor_values(t.first_moment);
    w.put_tensor_values(t.second_moment);
  }
  return std::move(w.bytes());
}

Checkpoint decode(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ValidationError("not a checkpoint file (bad magic)");
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<char>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.config = network::model_config_from_text(r.get_string("config"));
  ck.step = r.get<std::uint64_t>("step");
  ck.optimizer_updates = r.get<std::uint64_t>("optimizer update count");
  const auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.get_string("tensor name");
    const auto rank = r.get<std::uint64_t>("tensor rank");
    if (rank > 8) throw ValidationError("checkpoint tensor " + t.name + ": implausible rank " + std::to_string(rank));
    numerics::Shape shape;
    for (std::uint64_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint64_t>("tensor shape"));
    t.value = r.get_tensor(shape, "tensor values");
    t.first_moment = r.get_tensor(shape, "first moment");
    t.second_moment = r.get_tensor(shape, "second moment");
    ck.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw ValidationError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const network::Model& model, const AdamW& optimizer,
                     std::uint64_t step) {
  write_file_atomic(path, encode(capture(model, optimizer, step)));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void restore(const Checkpoint& ck, network::Model& model, AdamW* optimizer) {
  if (!(ck.config == model.config())) {
    std::istringstream a(network::to_text(ck.config)), b(network::to_text(model.config()));
    std::string la, lb;
    while (std::getline(a, la) && std::getline(b, lb))
      if (la != lb) throw ValidationError("checkpoint config mismatch: checkpoint has '" + la + "', model has '" + lb + "'");
    throw ValidationError("checkpoint config mismatch");
  }
  auto params = model.parameters();
  if (ck.tensors.size() != params.size())
    throw ValidationError("checkpoint has " + std::to_string(ck.tensors.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ck.tensors[i];
    if (t.name != params[i]->name)
      throw ValidationError("checkpoint tensor " + std::to_string(i) + " is '" + t.name + "', model expects '" +
                            params[i]->name + "'");
    if (t.value.shape() != params[i]->value.shape())
      throw ValidationError("checkpoint tensor " + t.name + " has shape " + numerics::to_string(t.value.shape()) +
                            ", model expects " + numerics::to_string(params[i]->value.shape()));
  }
  if (optimizer && optimizer->first_moments().size() != params.size())
    throw ValidationError("optimizer does not cover the model parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = ck.tensors[i].value;
    params[i]->zero_grad();
    if (optimizer) {
      optimizer->first_moments()[i] = ck.tensors[i].first_moment;
      optimizer->second_moments()[i] = ck.tensors[i].second_moment;
    }
  }
  if (optimizer) optimizer->set_updates(ck.optimizer_updates);
}

network::Model load_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  network::Model model(ck.config);
  restore(ck, model, nullptr);
  return model;
}

}  // namespace smoothsinger::training
