fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let code = cs_mud::cli::dispatch(&args, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
