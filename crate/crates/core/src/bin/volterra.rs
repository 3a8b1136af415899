fn main() {
    std::process::exit(volterra_sim::cli::run(std::env::args_os()));
}
