#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_service::config::Config;

fuzz_target!(|text: &str| {
    if let Ok(config) = Config::parse(text, std::path::Path::new(".")) {
        assert_eq!(config.hash().len(), 12);
    }
});
