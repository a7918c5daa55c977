import hypothesis

hypothesis.settings.register_profile("vlpipe", deadline=None, max_examples=50)
hypothesis.settings.load_profile("vlpipe")
