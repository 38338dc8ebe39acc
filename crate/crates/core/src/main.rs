fn main() {
    std::process::exit(cdpr_anomaly::cli::main());
}
