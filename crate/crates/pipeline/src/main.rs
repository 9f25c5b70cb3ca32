use clap::Parser;
use panelcap_pipeline::cli::Cli;
use panelcap_pipeline::error::EXIT_OK;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PANELCAP_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match panelcap_pipeline::execute(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
