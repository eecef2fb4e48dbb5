fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RESQ_LOG", "warn")).init();
    std::process::exit(resq_cli::run(std::env::args_os()));
}
