"""
Static checks against the Net API contract
==========================================

Every candidate must expose supported_hyperparameters() plus a Net class
with the exact constructor signature and the train_setup/learn/forward
methods. The checker reports structured violations and classifies the
decoder family; explain() renders the feedback that goes back to the LLM
in repair mode.
"""

from capgen import check, explain
from capgen.prompting import packaged_baseline

baseline = packaged_baseline()
report = check(baseline)
print("baseline passes:", report.passed)
print("baseline decoder:", report.decoder_type)
print()

# delete learn() and pass vocab_size where it does not belong
broken = baseline.replace("    def learn(self, train_data):", "    def _learn(self, train_data):")
broken = broken.replace(
    "self.decoder = nn.LSTM(self.hidden_size, self.hidden_size, batch_first=True)",
    "self.decoder = nn.TransformerDecoderLayer(d_model=640, nhead=8, vocab_size=out_shape[0])",
)

report = check(broken)
print("broken passes:", report.passed)
print("broken decoder:", report.decoder_type)
print()
print("repair feedback:")
print(explain(report))
