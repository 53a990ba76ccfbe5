fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = nsmodes_cli::main_with(std::env::args_os(), |name| std::env::var(name).ok());
    std::process::exit(code);
}
