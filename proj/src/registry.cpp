/********************************************************************************
* Copyright 2026 The edgefn Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*    http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
********************************************************************************/

#include "edgefn/registry.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "edgefn/crypto.hpp"
#include "edgefn/error.hpp"

namespace edgefn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::int64_t unix_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string utc_date() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

void write_atomic(const fs::path& path, std::string_view text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_failure, "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) throw Error(Errc::io_failure, "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Vehicle ids become directory names.
void check_vehicle_id(const std::string& id) {
    if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..")
        throw Error(Errc::invalid_argument, "bad vehicle id '" + id + "'");
}

json ok(json extra = json::object()) {
    extra["ok"] = true;
    return extra;
}

} // namespace

// --- Tokens -------------------------------------------------------------------

Tokens Tokens::load(const fs::path& path) {
    const auto j = json::parse(read_text(path), nullptr, false);
    if (j.is_discarded()) throw Error(Errc::malformed, "tokens file is not JSON: " + path.string());
    return from_json(j);
}

Tokens Tokens::from_json(const json& j) {
    Tokens t;
    try {
        const json users = j.value("users", json::object());
        const json vehicles = j.value("vehicles", json::object());
        for (const auto& [k, v] : users.items()) t.users[k] = v.get<std::string>();
        for (const auto& [k, v] : vehicles.items()) t.vehicles[k] = v.get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, std::string("tokens: ") + e.what());
    }
    for (auto* m : {&t.users, &t.vehicles})
        for (const auto& [k, v] : *m)
            if (v.size() != 64) throw Error(Errc::malformed, "token for '" + k + "' is not a SHA-256 hex digest");
    return t;
}

json Tokens::to_json() const { return {{"users", users}, {"vehicles", vehicles}}; }

bool Tokens::user_ok(std::string_view token) const {
    if (token.empty()) return false;
    const std::string h = sha256_hex(token);
    return std::any_of(users.begin(), users.end(), [&](const auto& kv) { return kv.second == h; });
}

bool Tokens::vehicle_ok(std::string_view vehicle_id, std::string_view token) const {
    auto it = vehicles.find(std::string(vehicle_id));
    return it != vehicles.end() && !token.empty() && it->second == sha256_hex(token);
}

json to_json(const PackageInfo& p) {
    return {{"name", p.name},
            {"version", p.version},
            {"checksum", p.checksum},
            {"kind", package_kind_name(p.kind)},
            {"manifest", to_json(p.manifest)},
            {"size", p.size}};
}

// --- Store --------------------------------------------------------------------

RegistryStore::RegistryStore(fs::path data_dir, Tokens tokens) : dir_(std::move(data_dir)), tokens_(std::move(tokens)) {
    fs::create_directories(dir_ / "packages");
    fs::create_directories(dir_ / "vehicles");
    for (const auto& [id, _] : tokens_.vehicles) check_vehicle_id(id);
    load();
}

void RegistryStore::load() {
    for (const auto& entry : fs::directory_iterator(dir_ / "packages")) {
        if (!entry.is_directory() || !fs::exists(entry.path() / "meta.json")) continue;
        const auto meta = json::parse(read_text(entry.path() / "meta.json"));
        const std::string checksum = entry.path().filename().string();
        const auto size = fs::file_size(entry.path() / "blob");
        for (const auto& e : meta.at("entries")) {
            PackageInfo p;
            p.name = e.at("name").get<std::string>();
            p.version = e.at("version").get<std::string>();
            p.kind = package_kind_from_name(e.at("kind").get<std::string>());
            p.manifest = manifest_from_json(e.at("manifest"));
            p.checksum = checksum;
            p.size = size;
            packages_[{p.name, p.version}] = std::move(p);
        }
    }
    for (const auto& [id, _] : tokens_.vehicles) {
        VehicleState st;
        st.desired.vehicle_id = id;
        const fs::path state = vehicle_dir(id) / "state.json";
        if (fs::exists(state)) {
            const auto j = json::parse(read_text(state));
            st.desired = desired_state_from_json(j.at("desired"));
            st.applied_revision = j.value("applied_revision", std::uint64_t{0});
            st.last_seen_ms = j.value("last_seen_ms", std::int64_t{0});
            st.last_status = j.value("last_status", json::object());
        }
        vehicles_[id] = std::move(st);
    }
}

fs::path RegistryStore::vehicle_dir(const std::string& id) const { return dir_ / "vehicles" / id; }

void RegistryStore::persist_vehicle(const std::string& id, const VehicleState& st) const {
    fs::create_directories(vehicle_dir(id));
    const json j = {{"desired", to_json(st.desired)},
                    {"applied_revision", st.applied_revision},
                    {"last_seen_ms", st.last_seen_ms},
                    {"last_status", st.last_status}};
    write_atomic(vehicle_dir(id) / "state.json", j.dump(2));
}

RegistryStore::VehicleState& RegistryStore::vehicle(const std::string& id) {
    auto it = vehicles_.find(id);
    if (it == vehicles_.end()) throw Error(Errc::unknown_vehicle, id);
    return it->second;
}

void RegistryStore::authorize_user(std::string_view token) const {
    if (!tokens_.user_ok(token)) throw Error(Errc::auth_failed, "invalid user token");
}

bool RegistryStore::authenticate_vehicle(std::string_view vehicle_id, std::string_view token) const {
    return tokens_.vehicle_ok(vehicle_id, token);
}

PackageInfo RegistryStore::put_package(const PackageUpload& upload) {
    if (upload.name.empty() || upload.version.empty())
        throw Error(Errc::invalid_argument, "package name and version are required");
    FunctionManifest manifest = manifest_from_json(upload.manifest);
    if (manifest.name != upload.name)
        throw Error(Errc::invalid_manifest, "manifest name '" + manifest.name + "' differs from package name");
    manifest.version = upload.version;
    manifest.validate();

    Bytes blob = upload.blob;
    if (blob.empty() && upload.kind == PackageKind::native_ref) {
        const std::string text = to_json(manifest).dump();
        blob.assign(text.begin(), text.end());
    }
    if (blob.empty()) throw Error(Errc::invalid_argument, "guest package without archive bytes");
    const std::string checksum = sha256_hex(blob);
    if (upload.checksum && *upload.checksum != checksum)
        throw Error(Errc::checksum_mismatch, "declared " + *upload.checksum + ", computed " + checksum);

    std::lock_guard lk(mu_);
    const auto key = std::make_pair(upload.name, upload.version);
    if (auto it = packages_.find(key); it != packages_.end()) {
        if (it->second.checksum == checksum) return it->second;
        throw Error(Errc::version_conflict, upload.name + " " + upload.version + " already exists with checksum " +
                                                it->second.checksum);
    }
    const fs::path pdir = dir_ / "packages" / checksum;
    fs::create_directories(pdir);
    if (!fs::exists(pdir / "blob"))
        write_atomic(pdir / "blob", std::string_view(reinterpret_cast<const char*>(blob.data()), blob.size()));
    json meta = {{"entries", json::array()}};
    if (fs::exists(pdir / "meta.json")) meta = json::parse(read_text(pdir / "meta.json"));
    meta["entries"].push_back({{"name", upload.name},
                               {"version", upload.version},
                               {"kind", package_kind_name(upload.kind)},
                               {"manifest", to_json(manifest)}});
    write_atomic(pdir / "meta.json", meta.dump(2));

    PackageInfo info{upload.name, upload.version, checksum, upload.kind, manifest, blob.size()};
    packages_[key] = info;
    return info;
}

DesiredState RegistryStore::set_deployment(const std::string& vehicle_id, const std::vector<DeployItem>& items) {
    DesiredState next;
    {
        std::lock_guard lk(mu_);
        VehicleState& st = vehicle(vehicle_id);
        next.vehicle_id = vehicle_id;
        next.revision = st.desired.revision + 1;
        for (const auto& item : items) {
            auto it = packages_.find({item.name, item.version});
            if (it == packages_.end()) throw Error(Errc::unknown_package, item.name + " " + item.version);
            DeployedFunction f{it->second.manifest, it->second.checksum, it->second.kind};
            for (const auto& [k, v] : item.params) f.manifest.params[k] = v;
            if (item.autostart) f.manifest.autostart = *item.autostart;
            next.functions.push_back(std::move(f));
        }
        next.validate();
        VehicleState updated = st;
        updated.desired = next;
        persist_vehicle(vehicle_id, updated);
        st = std::move(updated);
    }
    std::function<void(const DesiredState&)> cb;
    {
        std::lock_guard lk(mu_);
        cb = on_deploy_;
    }
    if (cb) cb(next);
    return next;
}

DesiredState RegistryStore::desired_state(const std::string& vehicle_id) const {
    std::lock_guard lk(mu_);
    auto it = vehicles_.find(vehicle_id);
    if (it == vehicles_.end()) throw Error(Errc::unknown_vehicle, vehicle_id);
    return it->second.desired;
}

IngestResult RegistryStore::ingest_logs(const std::string& vehicle_id, const json& records) {
    {
        std::lock_guard lk(mu_);
        vehicle(vehicle_id);
    }
    IngestResult res;
    if (!records.is_array()) {
        res.errors.push_back("records must be an array");
        return res;
    }
    std::string lines;
    const std::int64_t received = unix_ms();
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            const LogRecord r = log_record_from_json(records[i]);
            json stored = to_json(r);
            stored["vehicle"] = vehicle_id;
            stored["received_ms"] = received;
            lines += stored.dump();
            lines += '\n';
            ++res.accepted;
        } catch (const std::exception& e) {
            res.errors.push_back("record " + std::to_string(i) + ": " + e.what());
        }
    }
    if (!lines.empty()) {
        std::lock_guard lk(log_mu_);
        fs::create_directories(vehicle_dir(vehicle_id) / "logs");
        std::ofstream out(vehicle_dir(vehicle_id) / "logs" / (utc_date() + ".jsonl"), std::ios::app);
        out << lines;
        out.flush();
        if (!out) throw Error(Errc::io_failure, "log append failed for " + vehicle_id);
        ++log_batches_;
    }
    return res;
}

std::vector<json> RegistryStore::query_logs(const LogQuery& q) const {
    {
        std::lock_guard lk(mu_);
        if (!vehicles_.count(q.vehicle)) throw Error(Errc::unknown_vehicle, q.vehicle);
    }
    std::vector<json> out;
    const fs::path logs = vehicle_dir(q.vehicle) / "logs";
    if (!fs::exists(logs)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(logs))
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            const Nanos ts = j.value("ts", Nanos{0});
            if (q.function && j.value("function", std::string()) != *q.function) continue;
            if (q.level && j.value("level", std::string()) != log_level_name(*q.level)) continue;
            if (q.from && ts < *q.from) continue;
            if (q.to && ts > *q.to) continue;
            out.push_back(std::move(j));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const json& a, const json& b) { return a.value("ts", Nanos{0}) < b.value("ts", Nanos{0}); });
    return out;
}

std::vector<PackageInfo> RegistryStore::packages() const {
    std::lock_guard lk(mu_);
    std::vector<PackageInfo> out;
    for (const auto& [_, p] : packages_) out.push_back(p);
    return out;
}

std::vector<VehicleInfo> RegistryStore::vehicles() const {
    std::lock_guard lk(mu_);
    std::vector<VehicleInfo> out;
    for (const auto& [id, st] : vehicles_)
        out.push_back({id, st.desired.revision, st.applied_revision, st.connected, st.last_seen_ms, st.last_status});
    return out;
}

Bytes RegistryStore::package_blob(const std::string& checksum) const {
    if (checksum.size() != 64 || checksum.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw Error(Errc::unknown_package, checksum);
    const fs::path blob = dir_ / "packages" / checksum / "blob";
    if (!fs::exists(blob)) throw Error(Errc::unknown_package, checksum);
    const std::string text = read_text(blob);
    return Bytes(text.begin(), text.end());
}

void RegistryStore::record_ack(const std::string& vehicle_id, std::uint64_t revision) {
    std::lock_guard lk(mu_);
    VehicleState& st = vehicle(vehicle_id);
    st.applied_revision = std::max(st.applied_revision, revision);
    st.last_seen_ms = unix_ms();
    persist_vehicle(vehicle_id, st);
}

void RegistryStore::record_status(const std::string& vehicle_id, const json& status) {
    std::lock_guard lk(mu_);
    VehicleState& st = vehicle(vehicle_id);
    st.last_status = status;
    st.last_seen_ms = unix_ms();
    persist_vehicle(vehicle_id, st);
}

void RegistryStore::set_connected(const std::string& vehicle_id, bool connected) {
    std::lock_guard lk(mu_);
    VehicleState& st = vehicle(vehicle_id);
    st.connected = connected;
    st.last_seen_ms = unix_ms();
}

void RegistryStore::on_deploy(std::function<void(const DesiredState&)> callback) {
    std::lock_guard lk(mu_);
    on_deploy_ = std::move(callback);
}

// --- Server -------------------------------------------------------------------

RegistryServer::RegistryServer(std::shared_ptr<RegistryStore> store, const Endpoint& vehicles, const Endpoint& ops)
    : store_(std::move(store)), vehicle_ep_(vehicles), ops_ep_(ops) {
    vehicle_listener_ = Socket::listen(vehicle_ep_);
    ops_listener_ = Socket::listen(ops_ep_);
    if (vehicle_ep_.kind == Endpoint::Kind::tcp && vehicle_ep_.port == 0) vehicle_ep_.port = vehicle_listener_.local_port();
    if (ops_ep_.kind == Endpoint::Kind::tcp && ops_ep_.port == 0) ops_ep_.port = ops_listener_.local_port();
    store_->on_deploy([this](const DesiredState& s) { push(s); });
    vehicle_acceptor_ = std::thread([this] { accept_loop(vehicle_listener_, true); });
    ops_acceptor_ = std::thread([this] { accept_loop(ops_listener_, false); });
}

RegistryServer::~RegistryServer() { stop(); }

void RegistryServer::stop() {
    if (stopping_.exchange(true)) return;
    store_->on_deploy({});
    if (vehicle_acceptor_.joinable()) vehicle_acceptor_.join();
    if (ops_acceptor_.joinable()) ops_acceptor_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lk(mu_);
        for (auto& ch : open_) ch->close();
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
    vehicle_listener_.close();
    ops_listener_.close();
    if (vehicle_ep_.kind == Endpoint::Kind::unix_path) ::unlink(vehicle_ep_.path.c_str());
    if (ops_ep_.kind == Endpoint::Kind::unix_path) ::unlink(ops_ep_.path.c_str());
}

std::size_t RegistryServer::connected_vehicles() const {
    std::lock_guard lk(mu_);
    return vehicle_channels_.size();
}

void RegistryServer::accept_loop(Socket& listener, bool vehicle_side) {
    while (!stopping_.load()) {
        Socket s = listener.accept(std::chrono::milliseconds(100));
        if (!s.valid()) continue;
        auto ch = std::make_shared<ControlChannel>(std::move(s));
        std::lock_guard lk(mu_);
        if (stopping_.load()) {
            ch->close();
            break;
        }
        open_.push_back(ch);
        workers_.emplace_back([this, ch, vehicle_side] {
            try {
                if (vehicle_side)
                    serve_vehicle(ch);
                else
                    serve_ops(ch);
            } catch (const std::exception&) {
                // Connection-level failures only end this connection.
            }
            ch->close();
            std::lock_guard lk2(mu_);
            open_.erase(std::remove(open_.begin(), open_.end(), ch), open_.end());
        });
    }
}

void RegistryServer::serve_vehicle(std::shared_ptr<ControlChannel> ch) {
    auto hello = ch->recv_for(std::chrono::seconds(10));
    if (!hello || hello->type != ControlType::hello) return;
    const std::string vehicle = hello->payload.value("vehicle_id", std::string());
    const std::string token = hello->payload.value("token", std::string());
    if (!store_->authenticate_vehicle(vehicle, token)) {
        ch->send({ControlType::ack, hello->id, error_payload(errc_name(Errc::auth_failed), "vehicle rejected")});
        return;
    }
    ch->send({ControlType::ack, hello->id, ok()});
    {
        std::lock_guard lk(mu_);
        if (auto old = vehicle_channels_.find(vehicle); old != vehicle_channels_.end()) old->second->close();
        vehicle_channels_[vehicle] = ch;
    }
    store_->set_connected(vehicle, true);
    if (hello->payload.contains("applied_revision"))
        store_->record_ack(vehicle, hello->payload["applied_revision"].get<std::uint64_t>());
    ch->send({ControlType::desired_state, ch->next_id(), to_json(store_->desired_state(vehicle))});

    try {
        while (!stopping_.load()) {
            if (!ch->socket().readable(std::chrono::milliseconds(200))) continue;
            auto msg = ch->recv();
            if (!msg) break;
            switch (msg->type) {
            case ControlType::log: {
                const auto res = store_->ingest_logs(vehicle, msg->payload.value("records", json::array()));
                ch->send({ControlType::ack, msg->id,
                          {{"ok", res.errors.empty()}, {"accepted", res.accepted}, {"errors", res.errors}}});
                break;
            }
            case ControlType::status:
                store_->record_status(vehicle, msg->payload);
                break;
            case ControlType::ack:
                if (msg->payload.contains("revision"))
                    store_->record_ack(vehicle, msg->payload["revision"].get<std::uint64_t>());
                break;
            case ControlType::heartbeat:
                store_->set_connected(vehicle, true);
                ch->send({ControlType::heartbeat, msg->id, json::object()});
                break;
            case ControlType::get_package: {
                const auto checksum = msg->payload.value("checksum", std::string());
                try {
                    const Bytes blob = store_->package_blob(checksum);
                    ch->send({ControlType::ack, msg->id, ok({{"checksum", checksum}, {"blob", base64_encode(blob)}})});
                } catch (const Error& e) {
                    ch->send({ControlType::ack, msg->id, error_payload(errc_name(e.code()), e.what())});
                }
                break;
            }
            default:
                ch->send({ControlType::ack, msg->id,
                          error_payload(errc_name(Errc::invalid_argument),
                                        "unexpected message " + std::string(control_type_name(msg->type)))});
            }
        }
    } catch (const std::exception&) {
    }
    {
        std::lock_guard lk(mu_);
        if (auto it = vehicle_channels_.find(vehicle); it != vehicle_channels_.end() && it->second == ch)
            vehicle_channels_.erase(it);
        else
            return;  // A newer connection took over.
    }
    store_->set_connected(vehicle, false);
}

void RegistryServer::serve_ops(std::shared_ptr<ControlChannel> ch) {
    while (!stopping_.load()) {
        if (!ch->socket().readable(std::chrono::milliseconds(200))) continue;
        auto msg = ch->recv();
        if (!msg) return;
        json reply;
        try {
            reply = handle_ops(*msg);
        } catch (const Error& e) {
            reply = error_payload(errc_name(e.code()), e.what());
        } catch (const std::exception& e) {
            reply = error_payload(errc_name(Errc::malformed), e.what());
        }
        ch->send({ControlType::ack, msg->id, reply});
    }
}

json RegistryServer::handle_ops(const ControlEnvelope& req) {
    const json& p = req.payload;
    store_->authorize_user(p.value("token", std::string()));
    switch (req.type) {
    case ControlType::put_package: {
        PackageUpload up;
        up.name = p.at("name").get<std::string>();
        up.version = p.at("version").get<std::string>();
        up.kind = package_kind_from_name(p.value("kind", std::string("native")));
        up.manifest = p.at("manifest");
        if (p.contains("blob")) up.blob = base64_decode(p["blob"].get<std::string>());
        if (p.contains("checksum")) up.checksum = p["checksum"].get<std::string>();
        return ok({{"package", to_json(store_->put_package(up))}});
    }
    case ControlType::set_deployment: {
        std::vector<DeployItem> items;
        for (const auto& f : p.at("functions")) {
            DeployItem item;
            item.name = f.at("name").get<std::string>();
            item.version = f.at("version").get<std::string>();
            const json params = f.value("params", json::object());
            for (const auto& [k, v] : params.items())
                item.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
            if (f.contains("autostart")) item.autostart = f["autostart"].get<bool>();
            items.push_back(std::move(item));
        }
        const auto state = store_->set_deployment(p.at("vehicle").get<std::string>(), items);
        return ok({{"revision", state.revision}, {"desired", to_json(state)}});
    }
    case ControlType::query_logs: {
        LogQuery q;
        q.vehicle = p.at("vehicle").get<std::string>();
        if (p.contains("function")) q.function = p["function"].get<std::string>();
        if (p.contains("level")) q.level = log_level_from_name(p["level"].get<std::string>());
        if (p.contains("from")) q.from = p["from"].get<Nanos>();
        if (p.contains("to")) q.to = p["to"].get<Nanos>();
        return ok({{"records", store_->query_logs(q)}});
    }
    case ControlType::list: {
        json pkgs = json::array(), vehicles = json::array();
        for (const auto& pk : store_->packages()) pkgs.push_back(to_json(pk));
        for (const auto& v : store_->vehicles())
            vehicles.push_back({{"id", v.id},
                                {"revision", v.revision},
                                {"applied_revision", v.applied_revision},
                                {"connected", v.connected},
                                {"last_seen_ms", v.last_seen_ms},
                                {"status", v.last_status}});
        return ok({{"packages", pkgs}, {"vehicles", vehicles}});
    }
    default:
        throw Error(Errc::invalid_argument, "unsupported request " + std::string(control_type_name(req.type)));
    }
}

void RegistryServer::push(const DesiredState& state) {
    std::shared_ptr<ControlChannel> ch;
    {
        std::lock_guard lk(mu_);
        auto it = vehicle_channels_.find(state.vehicle_id);
        if (it == vehicle_channels_.end()) return;
        ch = it->second;
    }
    try {
        ch->send({ControlType::desired_state, ch->next_id(), to_json(state)});
    } catch (const std::exception&) {
        ch->close();
    }
}

json ops_call(const Endpoint& ops, ControlType type, json payload, std::chrono::milliseconds timeout) {
    const ControlEnvelope reply = control_request(ops, type, std::move(payload), timeout);
    if (!reply.payload.value("ok", false)) {
        const std::string code = reply.payload.value("error", std::string("malformed"));
        Errc errc = Errc::malformed;
        try {
            errc = errc_from_name(code);
        } catch (const Error&) {
        }
        // Strip the "<code>: " prefix the remote Error already carries.
        std::string message = reply.payload.value("message", std::string());
        if (message.rfind(code + ": ", 0) == 0) message = message.substr(code.size() + 2);
        throw Error(errc, message);
    }
    return reply.payload;
}

} // namespace edgefn
