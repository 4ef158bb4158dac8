from learntrack.main import init_app
init_app("config/testing.cfg")
